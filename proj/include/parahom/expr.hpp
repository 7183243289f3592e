#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace parahom {

/// Small arithmetic expression language used for custom coefficient fields
/// and closed-form boundary graphs.
///
/// Grammar: numbers, named variables, + - * / ^, unary minus, parentheses,
/// the constant `pi`, and the functions sin cos tan exp log sqrt abs tanh
/// floor min max (min/max take two or more arguments).
class Expression {
public:
    Expression() = default;

    /// Parses `source`; `variables` fixes the slot order used by evaluate().
    /// Throws std::invalid_argument with a column marker on syntax errors or
    /// unknown identifiers.
    Expression(const std::string& source, std::vector<std::string> variables,
               std::vector<std::pair<std::string, int>> aliases = {});

    double evaluate(std::span<const double> values) const;

    const std::string& source() const { return source_; }
    const std::vector<std::string>& variables() const { return variables_; }
    bool empty() const { return root_ == nullptr; }

    struct Node;

private:
    std::string source_;
    std::vector<std::string> variables_;
    std::vector<std::pair<std::string, int>> aliases_;
    std::shared_ptr<const Node> root_;
};

/// Variable names for a point in R^d: x1..xd.
std::vector<std::string> coordinate_names(int dim);

/// Parses a scalar function of X in R^d where `lambda` aliases xd.
Expression parse_spatial_expression(const std::string& source, int dim);

}  // namespace parahom
