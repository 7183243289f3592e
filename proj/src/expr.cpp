#include "parahom/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace parahom {

struct Expression::Node {
    enum class Kind { Constant, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
    Kind kind = Kind::Constant;
    double value = 0.0;
    int slot = -1;
    std::string function;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make_binary(Kind kind, NodePtr lhs, NodePtr rhs) {
    auto node = std::make_shared<Expression::Node>();
    node->kind = kind;
    node->args = {std::move(lhs), std::move(rhs)};
    return node;
}

class Parser {
public:
    Parser(const std::string& text, const std::vector<std::string>& variables,
           const std::vector<std::pair<std::string, int>>& aliases)
        : text_(text), variables_(variables), aliases_(aliases) {}

    NodePtr parse() {
        auto node = parse_sum();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return node;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression '" + text_ + "': " + what + " at column " +
                                    std::to_string(pos_ + 1));
    }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_sum() {
        auto lhs = parse_product();
        for (;;) {
            if (accept('+')) lhs = make_binary(Kind::Add, lhs, parse_product());
            else if (accept('-')) lhs = make_binary(Kind::Sub, lhs, parse_product());
            else return lhs;
        }
    }

    NodePtr parse_product() {
        auto lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = make_binary(Kind::Mul, lhs, parse_unary());
            else if (accept('/')) lhs = make_binary(Kind::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) {
            auto node = std::make_shared<Expression::Node>();
            node->kind = Kind::Negate;
            node->args = {parse_unary()};
            return node;
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        auto base = parse_primary();
        // right-associative, binds tighter than unary minus on the left operand
        if (accept('^')) return make_binary(Kind::Pow, base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_space();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (accept('(')) {
            auto inner = parse_sum();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        auto node = std::make_shared<Expression::Node>();
        node->kind = Kind::Constant;
        node->value = v;
        return node;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);

        if (accept('(')) {
            static const std::vector<std::string> unary = {"sin",  "cos", "tan",  "exp",  "log",
                                                           "sqrt", "abs", "tanh", "floor"};
            auto node = std::make_shared<Expression::Node>();
            node->kind = Kind::Call;
            node->function = name;
            if (!accept(')')) {
                do {
                    node->args.push_back(parse_sum());
                } while (accept(','));
                if (!accept(')')) fail("expected ')' after arguments");
            }
            const bool is_unary = std::find(unary.begin(), unary.end(), name) != unary.end();
            if (is_unary && node->args.size() != 1) fail("function '" + name + "' takes one argument");
            if ((name == "min" || name == "max") && node->args.size() < 2)
                fail("function '" + name + "' takes at least two arguments");
            if (!is_unary && name != "min" && name != "max") fail("unknown function '" + name + "'");
            return node;
        }

        auto node = std::make_shared<Expression::Node>();
        if (name == "pi") {
            node->kind = Kind::Constant;
            node->value = std::numbers::pi;
            return node;
        }
        node->kind = Kind::Variable;
        const auto it = std::find(variables_.begin(), variables_.end(), name);
        if (it != variables_.end()) {
            node->slot = static_cast<int>(it - variables_.begin());
            return node;
        }
        for (const auto& [alias, slot] : aliases_) {
            if (alias == name) {
                node->slot = slot;
                return node;
            }
        }
        pos_ = start;
        fail("unknown identifier '" + name + "'");
    }

    const std::string& text_;
    const std::vector<std::string>& variables_;
    const std::vector<std::pair<std::string, int>>& aliases_;
    std::size_t pos_ = 0;
};

double eval(const Expression::Node& n, std::span<const double> v) {
    switch (n.kind) {
        case Kind::Constant: return n.value;
        case Kind::Variable: return v[static_cast<std::size_t>(n.slot)];
        case Kind::Negate: return -eval(*n.args[0], v);
        case Kind::Add: return eval(*n.args[0], v) + eval(*n.args[1], v);
        case Kind::Sub: return eval(*n.args[0], v) - eval(*n.args[1], v);
        case Kind::Mul: return eval(*n.args[0], v) * eval(*n.args[1], v);
        case Kind::Div: return eval(*n.args[0], v) / eval(*n.args[1], v);
        case Kind::Pow: return std::pow(eval(*n.args[0], v), eval(*n.args[1], v));
        case Kind::Call: break;
    }
    const std::string& f = n.function;
    if (f == "min" || f == "max") {
        double acc = eval(*n.args[0], v);
        for (std::size_t i = 1; i < n.args.size(); ++i) {
            const double x = eval(*n.args[i], v);
            acc = (f == "min") ? std::min(acc, x) : std::max(acc, x);
        }
        return acc;
    }
    const double x = eval(*n.args[0], v);
    if (f == "sin") return std::sin(x);
    if (f == "cos") return std::cos(x);
    if (f == "tan") return std::tan(x);
    if (f == "exp") return std::exp(x);
    if (f == "log") return std::log(x);
    if (f == "sqrt") return std::sqrt(x);
    if (f == "abs") return std::abs(x);
    if (f == "tanh") return std::tanh(x);
    return std::floor(x);
}

}  // namespace

Expression::Expression(const std::string& source, std::vector<std::string> variables,
                       std::vector<std::pair<std::string, int>> aliases)
    : source_(source), variables_(std::move(variables)), aliases_(std::move(aliases)) {
    root_ = Parser(source_, variables_, aliases_).parse();
}

double Expression::evaluate(std::span<const double> values) const {
    if (!root_) throw std::logic_error("evaluating an empty expression");
    if (values.size() < variables_.size())
        throw std::invalid_argument("expression '" + source_ + "' needs " +
                                    std::to_string(variables_.size()) + " values");
    return eval(*root_, values);
}

std::vector<std::string> coordinate_names(int dim) {
    std::vector<std::string> names;
    for (int i = 1; i <= dim; ++i) names.push_back("x" + std::to_string(i));
    return names;
}

Expression parse_spatial_expression(const std::string& source, int dim) {
    return Expression(source, coordinate_names(dim), {{"lambda", dim - 1}});
}

}  // namespace parahom
