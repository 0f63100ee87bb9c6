#pragma once

#include <memory>
#include <string>
#include <vector>

namespace clfstab::cli {

// Arithmetic expression over named variables: + - * / ^, unary minus,
// sin cos tan asin acos atan sinh cosh tanh exp log sqrt cbrt abs sign,
// min max pow atan2, and the constants pi and e.
class Expr {
 public:
  struct Node;

  // Throws Error(Validation) on syntax errors or unknown identifiers.
  static Expr compile(const std::string& text, const std::vector<std::string>& variables);

  double operator()(const double* values) const;
  double operator()(const std::vector<double>& values) const { return (*this)(values.data()); }
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

// Splits on a separator, trimming blanks; empty pieces are kept.
std::vector<std::string> split(const std::string& text, char sep);
std::string trim(const std::string& text);

}  // namespace clfstab::cli
