#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "kabem/tensor.hpp"

namespace kabem {

// Named trainable parameters. Iteration order is lexicographic by name, which
// fixes the checkpoint layout and the optimizer's visiting order.
class ParamStore {
 public:
  // Registers a new parameter; throws if the name is taken.
  Tensor& add(const std::string& name, Matrix init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();

  // Copies values from `other`; both stores must hold identical names/shapes.
  void copy_values_from(const ParamStore& other);
  ParamStore clone() const;

  void write(std::ostream& out) const;
  // Reads the section written by write(). Every stored name must exist with the
  // same shape; missing or extra names are rejected.
  void read_into(std::istream& in);

 private:
  std::map<std::string, Tensor> params_;
};

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);
// Uniform in +-sqrt(6 / (rows + cols)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace kabem
