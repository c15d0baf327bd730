/**
 * @file expr.hpp
 * @brief Tiny pointwise expression language for initial data:
 *        numbers, pi, x, y, sin(.), cos(.), + - * / and parentheses.
 */
#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "plate_nc/core.hpp"

namespace plate_nc::expr {

using Fn = std::function<double(double, double)>;

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Fn parse() {
        Fn f = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return f;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression error at position " + std::to_string(pos_) + ": " + what +
                          " in '" + std::string(src_) + "'");
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    Fn parse_sum() {
        Fn lhs = parse_product();
        for (;;) {
            if (eat('+')) {
                Fn rhs = parse_product();
                lhs = [lhs, rhs](double x, double y) { return lhs(x, y) + rhs(x, y); };
            } else if (eat('-')) {
                Fn rhs = parse_product();
                lhs = [lhs, rhs](double x, double y) { return lhs(x, y) - rhs(x, y); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_product() {
        Fn lhs = parse_unary();
        for (;;) {
            if (eat('*')) {
                Fn rhs = parse_unary();
                lhs = [lhs, rhs](double x, double y) { return lhs(x, y) * rhs(x, y); };
            } else if (eat('/')) {
                Fn rhs = parse_unary();
                lhs = [lhs, rhs](double x, double y) { return lhs(x, y) / rhs(x, y); };
            } else {
                return lhs;
            }
        }
    }

    Fn parse_unary() {
        if (eat('-')) {
            Fn inner = parse_unary();
            return [inner](double x, double y) { return -inner(x, y); };
        }
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    Fn parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        if (eat('(')) {
            Fn inner = parse_sum();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const std::string rest(src_.substr(pos_));
            char* end = nullptr;
            const double value = std::strtod(rest.c_str(), &end);
            if (end == rest.c_str()) fail("bad number");
            pos_ += static_cast<std::size_t>(end - rest.c_str());
            return [value](double, double) { return value; };
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            const std::string_view word = src_.substr(start, pos_ - start);
            if (word == "x") return [](double x, double) { return x; };
            if (word == "y") return [](double, double y) { return y; };
            if (word == "pi") return [](double, double) { return M_PI; };
            if (word == "sin" || word == "cos") {
                if (!eat('(')) fail("expected '(' after " + std::string(word));
                Fn arg = parse_sum();
                if (!eat(')')) fail("expected ')'");
                if (word == "sin") return [arg](double x, double y) { return std::sin(arg(x, y)); };
                return [arg](double x, double y) { return std::cos(arg(x, y)); };
            }
            pos_ = start;
            fail("unknown identifier '" + std::string(word) + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline Fn parse(std::string_view src) { return Parser(src).parse(); }

}  // namespace plate_nc::expr
