#include "graspinfer/manifold.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "graspinfer/errors.hpp"

namespace graspinfer {

ManifoldSpec::ManifoldSpec(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
  int offset = 0;
  for (auto& b : blocks_) {
    b.offset = offset;
    offset += b.ambient_dim();
  }
  ambient_dim_ = offset;
}

ManifoldSpec ManifoldSpec::euclidean(int n) {
  if (n < 1) throw ContractViolation("Euclidean block dimension must be >= 1");
  return ManifoldSpec({Block{Block::Kind::euclidean, n, 0}});
}

ManifoldSpec ManifoldSpec::sphere(int d) {
  if (d < 1) throw ContractViolation("sphere block intrinsic dimension must be >= 1");
  return ManifoldSpec({Block{Block::Kind::sphere, d, 0}});
}

ManifoldSpec ManifoldSpec::times(const ManifoldSpec& other) const {
  std::vector<Block> blocks = blocks_;
  blocks.insert(blocks.end(), other.blocks_.begin(), other.blocks_.end());
  return ManifoldSpec(std::move(blocks));
}

ManifoldSpec ManifoldSpec::parse(std::string_view text) {
  std::vector<Block> blocks;
  std::size_t i = 0;
  while (i < text.size()) {
    const char kind = text[i];
    if (kind != 'R' && kind != 'S' && kind != 'r' && kind != 's')
      throw ParseError("manifold spec '" + std::string(text) + "': expected R<n> or S<d> at position " +
                       std::to_string(i));
    ++i;
    std::size_t j = i;
    while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
    if (j == i)
      throw ParseError("manifold spec '" + std::string(text) + "': missing dimension at position " +
                       std::to_string(i));
    const int dim = std::stoi(std::string(text.substr(i, j - i)));
    if (dim < 1)
      throw ParseError("manifold spec '" + std::string(text) + "': dimension must be >= 1");
    blocks.push_back(Block{(kind == 'R' || kind == 'r') ? Block::Kind::euclidean : Block::Kind::sphere,
                           dim, 0});
    i = j;
    if (i < text.size()) {
      if (text[i] != 'x' && text[i] != 'X')
        throw ParseError("manifold spec '" + std::string(text) + "': expected 'x' at position " +
                         std::to_string(i));
      ++i;
      if (i == text.size())
        throw ParseError("manifold spec '" + std::string(text) + "': trailing 'x'");
    }
  }
  if (blocks.empty()) throw ParseError("manifold spec is empty");
  return ManifoldSpec(std::move(blocks));
}

std::string ManifoldSpec::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& b : blocks_) {
    if (!first) out << 'x';
    out << (b.kind == Block::Kind::euclidean ? 'R' : 'S') << b.dim;
    first = false;
  }
  return out.str();
}

bool ManifoldSpec::operator==(const ManifoldSpec& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    if (blocks_[i].kind != other.blocks_[i].kind || blocks_[i].dim != other.blocks_[i].dim)
      return false;
  }
  return true;
}

bool ManifoldSpec::on_manifold(const Eigen::VectorXd& point, double tol) const {
  if (point.size() != ambient_dim_) return false;
  for (const auto& b : blocks_) {
    if (b.kind != Block::Kind::sphere) continue;
    const double norm = point.segment(b.offset, b.ambient_dim()).norm();
    if (std::abs(norm - 1.0) > tol) return false;
    if (!point.segment(b.offset, b.ambient_dim()).allFinite()) return false;
  }
  return true;
}

void ManifoldSpec::require_dim(const Eigen::VectorXd& v, const char* what) const {
  if (v.size() != ambient_dim_)
    throw ContractViolation(std::string(what) + ": expected length " + std::to_string(ambient_dim_) +
                            ", got " + std::to_string(v.size()));
}

void ManifoldSpec::require_point(const Eigen::VectorXd& point, double tol) const {
  require_dim(point, "point");
  for (const auto& b : blocks_) {
    if (b.kind != Block::Kind::sphere) continue;
    const double norm = point.segment(b.offset, b.ambient_dim()).norm();
    if (std::abs(norm - 1.0) > tol)
      throw InvalidPoint("sphere slice at offset " + std::to_string(b.offset) + " has norm " +
                         std::to_string(norm));
  }
}

void ManifoldSpec::renormalize(Eigen::VectorXd& point) const {
  for (const auto& b : blocks_) {
    if (b.kind != Block::Kind::sphere) continue;
    auto slice = point.segment(b.offset, b.ambient_dim());
    const double norm = slice.norm();
    if (norm > 0.0) slice /= norm;
  }
}

Eigen::VectorXd project_to_tangent(const ManifoldSpec& spec, const Eigen::VectorXd& base,
                                   const Eigen::VectorXd& ambient) {
  spec.require_dim(ambient, "ambient vector");
  spec.require_point(base);
  Eigen::VectorXd out = ambient;
  for (const auto& b : spec.blocks()) {
    if (b.kind != Block::Kind::sphere) continue;
    const auto q = base.segment(b.offset, b.ambient_dim());
    auto g = out.segment(b.offset, b.ambient_dim());
    g -= q * q.dot(g);
  }
  return out;
}

GeodesicState geodesic_step(const ManifoldSpec& spec, const Eigen::VectorXd& point,
                            const Eigen::VectorXd& velocity, double t) {
  spec.require_point(point);
  spec.require_dim(velocity, "velocity");
  GeodesicState out{point, velocity};
  for (const auto& b : spec.blocks()) {
    const int n = b.ambient_dim();
    if (b.kind == Block::Kind::euclidean) {
      out.point.segment(b.offset, n) += t * velocity.segment(b.offset, n);
      continue;
    }
    const auto q = point.segment(b.offset, n);
    const auto v = velocity.segment(b.offset, n);
    const double speed = v.norm();
    if (speed == 0.0) continue;  // fixed point of the flow
    const double st = speed * t;
    // sin(st)/speed via sinc to stay stable as st -> 0
    double sinc_t;
    if (std::abs(st) < 1e-8) {
      sinc_t = t * (1.0 - st * st / 6.0);
    } else {
      sinc_t = std::sin(st) / speed;
    }
    const double c = std::cos(st);
    Eigen::VectorXd new_q = q * c + v * sinc_t;
    Eigen::VectorXd new_v = v * c - q * (speed * std::sin(st));
    new_q /= new_q.norm();
    out.point.segment(b.offset, n) = new_q;
    out.velocity.segment(b.offset, n) = new_v;
  }
  return out;
}

double geodesic_distance(const ManifoldSpec& spec, const Eigen::VectorXd& a,
                         const Eigen::VectorXd& b) {
  spec.require_point(a);
  spec.require_point(b);
  double sq = 0.0;
  for (const auto& blk : spec.blocks()) {
    const int n = blk.ambient_dim();
    if (blk.kind == Block::Kind::euclidean) {
      sq += (a.segment(blk.offset, n) - b.segment(blk.offset, n)).squaredNorm();
    } else {
      // chord form of arccos(a.b); accurate near zero separation
      const double half_chord = 0.5 * (a.segment(blk.offset, n) - b.segment(blk.offset, n)).norm();
      const double arc = 2.0 * std::asin(std::min(1.0, half_chord));
      sq += arc * arc;
    }
  }
  return std::sqrt(sq);
}

Eigen::VectorXd sample_uniform(const ManifoldSpec& spec, const std::vector<Box>& boxes, Rng& rng) {
  Eigen::VectorXd out(spec.ambient_dim());
  std::size_t box_index = 0;
  for (const auto& b : spec.blocks()) {
    const int n = b.ambient_dim();
    if (b.kind == Block::Kind::euclidean) {
      if (box_index >= boxes.size())
        throw ConfigError("sample_uniform: missing box bounds for Euclidean block at offset " +
                          std::to_string(b.offset));
      const Box& box = boxes[box_index++];
      if (box.lo.size() != n || box.hi.size() != n)
        throw ConfigError("sample_uniform: box bounds have wrong dimension for block at offset " +
                          std::to_string(b.offset));
      for (int i = 0; i < n; ++i) out[b.offset + i] = rng.uniform(box.lo[i], box.hi[i]);
    } else {
      auto slice = out.segment(b.offset, n);
      double norm = 0.0;
      do {
        for (int i = 0; i < n; ++i) slice[i] = rng.normal();
        norm = slice.norm();
      } while (norm == 0.0);
      slice /= norm;
    }
  }
  return out;
}

Eigen::VectorXd sample_uniform(const ManifoldSpec& spec, Rng& rng) {
  return sample_uniform(spec, {}, rng);
}

}  // namespace graspinfer
