#include "declmi/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace declmi::numerics {

namespace {
constexpr char kMagic[4] = {'D', 'M', 'P', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw std::runtime_error("parameter container: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double read_f64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("parameter container: truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace

Matrix& ParamBundle::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (index_.count(name)) throw std::invalid_argument("ParamBundle: duplicate name " + name);
  index_[name] = names_.size();
  names_.push_back(name);
  values_.emplace_back(Matrix::Zero(rows, cols));
  return values_.back();
}

Matrix& ParamBundle::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamBundle: no entry " + name);
  return values_[it->second];
}

const Matrix& ParamBundle::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamBundle: no entry " + name);
  return values_[it->second];
}

Eigen::Index ParamBundle::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& m : values_) n += m.size();
  return n;
}

Vector ParamBundle::to_vector() const {
  Vector flat(scalar_count());
  Eigen::Index off = 0;
  for (const auto& m : values_) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat[off++] = m(r, c);
  }
  return flat;
}

void ParamBundle::from_vector(const Vector& flat) {
  if (flat.size() != scalar_count())
    throw std::invalid_argument("ParamBundle::from_vector: size mismatch");
  Eigen::Index off = 0;
  for (auto& m : values_) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[off++];
  }
}

ParamBundle ParamBundle::zeros_like() const {
  ParamBundle out;
  for (std::size_t i = 0; i < names_.size(); ++i)
    out.add(names_[i], values_[i].rows(), values_[i].cols());
  return out;
}

void ParamBundle::set_zero() {
  for (auto& m : values_) m.setZero();
}

bool ParamBundle::same_shape(const ParamBundle& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() ||
        values_[i].cols() != other.values_[i].cols())
      return false;
  }
  return true;
}

void ParamBundle::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, 4);
  write_u32(os, static_cast<std::uint32_t>(names_.size()));
  for (std::size_t i = 0; i < names_.size(); ++i) {
    write_u32(os, static_cast<std::uint32_t>(names_[i].size()));
    os.write(names_[i].data(), static_cast<std::streamsize>(names_[i].size()));
    const Matrix& m = values_[i];
    write_u32(os, static_cast<std::uint32_t>(m.rows()));
    write_u32(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(os, m(r, c));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

ParamBundle ParamBundle::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("parameter container: bad magic in " + path);
  const std::uint32_t count = read_u32(is);
  ParamBundle out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("parameter container: truncated name");
    const std::uint32_t rows = read_u32(is);
    const std::uint32_t cols = read_u32(is);
    Matrix& m = out.add(name, rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = read_f64(is);
  }
  return out;
}

AdamState AdamState::init(const ParamBundle& params, AdamConfig config) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.t = 0;
  s.config = config;
  return s;
}

void adam_step(ParamBundle& params, const ParamBundle& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment))
    throw std::invalid_argument("adam_step: shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    ensure_finite(grads.value(i), "adam_step gradient " + grads.name(i));

  state.t += 1;
  const auto& cfg = state.config;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params.value(i);
    const Matrix& g = grads.value(i);
    Matrix& m = state.first_moment.value(i);
    Matrix& v = state.second_moment.value(i);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * g.array().square().matrix();
    const Matrix m_hat = m / bc1;
    const Matrix v_hat = v / bc2;
    p.array() -= cfg.alpha * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

}  // namespace declmi::numerics
