#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "declmi/numerics.hpp"

namespace declmi::numerics {

// Ordered collection of named, shaped f64 arrays. Insertion order is part
// of the identity: flattening, Adam state and the binary container all
// follow it.
class ParamBundle {
 public:
  Matrix& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Matrix& value(std::size_t i) { return values_[i]; }
  const Matrix& value(std::size_t i) const { return values_[i]; }

  Eigen::Index scalar_count() const;
  Vector to_vector() const;
  void from_vector(const Vector& flat);

  // Same names and shapes, all entries zero.
  ParamBundle zeros_like() const;
  void set_zero();
  bool same_shape(const ParamBundle& other) const;

  // Binary container: magic "DMP1", little-endian, per entry a u32 name
  // length, the name bytes, u32 rows, u32 cols, then rows*cols f64 values.
  void save(const std::string& path) const;
  static ParamBundle load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamBundle first_moment;
  ParamBundle second_moment;
  std::int64_t t = 0;
  AdamConfig config;

  static AdamState init(const ParamBundle& params, AdamConfig config = {});
};

// Standard bias-corrected update, applied in place; increments state.t by
// exactly 1. Throws on shape mismatch or non-finite gradients.
void adam_step(ParamBundle& params, const ParamBundle& grads, AdamState& state);

}  // namespace declmi::numerics
