#include "kabem/param_store.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kabem {

Tensor& ParamStore::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.emplace(name, Tensor::parameter(std::move(init)));
  if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.shape().size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) throw std::invalid_argument("parameter stores differ in size");
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape()) {
      throw ShapeError("parameter " + name + ": shape " + to_string(src.shape()) + " vs " +
                       to_string(t.shape()));
    }
    t.mutable_value() = src.value();
  }
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, t] : params_) out.add(name, t.value());
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  return v;
}

void ParamStore::write(std::ostream& out) const {
  out << "params " << params_.size() << '\n';
  for (const auto& [name, t] : params_) {
    out << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
    const auto& v = t.value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << ' ';
      out << format_double(v[i]);
    }
    out << '\n';
  }
}

void ParamStore::read_into(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "params") {
    throw std::runtime_error("checkpoint: expected 'params <count>' section");
  }
  if (count != params_.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(count) +
                             " parameters, model expects " + std::to_string(params_.size()));
  }
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw std::runtime_error("checkpoint: truncated header");
    auto it = params_.find(name);
    if (it == params_.end()) throw std::runtime_error("checkpoint: unknown parameter " + name);
    Tensor& t = it->second;
    if (t.rows() != rows || t.cols() != cols) {
      throw std::runtime_error("checkpoint: parameter " + name + " has shape " +
                               std::to_string(rows) + "x" + std::to_string(cols) +
                               ", model expects " + to_string(t.shape()));
    }
    Matrix& v = t.mutable_value();
    std::string tok;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!(in >> tok)) throw std::runtime_error("checkpoint: truncated values for " + name);
      v[i] = parse_double(tok);
    }
  }
}

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = dist(rng);
  return m;
}

}  // namespace kabem
