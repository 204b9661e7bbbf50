#include "graspinfer/scene.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "graspinfer/errors.hpp"

namespace graspinfer {

namespace {

// Rotation of the xy coordinates by `angle`; other coordinates untouched.
Eigen::VectorXd rotate_xy(const Eigen::VectorXd& v, double angle) {
  Eigen::VectorXd out = v;
  const double c = std::cos(angle), s = std::sin(angle);
  out[0] = c * v[0] - s * v[1];
  out[1] = s * v[0] + c * v[1];
  return out;
}

}  // namespace

std::string shape_name(Primitive::Shape shape) {
  switch (shape) {
    case Primitive::Shape::disk: return "disk";
    case Primitive::Shape::box: return "box";
    case Primitive::Shape::capsule: return "capsule";
  }
  return "?";
}

void Primitive::validate(int dim) const {
  if (center.size() != dim)
    throw ConfigError("primitive " + shape_name(shape) + ": center dimension != workspace dimension");
  if (dim < 2) throw ConfigError("primitives need a workspace of dimension >= 2");
  switch (shape) {
    case Shape::disk:
      if (size.size() != 1 || size[0] <= 0.0)
        throw ConfigError("disk: size must be a positive radius");
      break;
    case Shape::box:
      if (size.size() != dim || (size.array() <= 0.0).any())
        throw ConfigError("box: size must be positive half extents per axis");
      break;
    case Shape::capsule:
      if (size.size() != 2 || size[0] <= 0.0 || size[1] <= 0.0)
        throw ConfigError("capsule: size must be {half_length, radius}, both positive");
      break;
  }
}

double Primitive::sdf(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const Eigen::VectorXd w = x - center;
  switch (shape) {
    case Shape::disk: {
      const double r = w.norm();
      if (grad) {
        if (r > 1e-300)
          *grad = w / r;
        else
          grad->setZero(x.size());
      }
      return r - size[0];
    }
    case Shape::box: {
      const Eigen::VectorXd local = rotate_xy(w, -angle);
      const Eigen::VectorXd q = local.cwiseAbs() - size;
      const Eigen::VectorXd outside = q.cwiseMax(0.0);
      const double outside_norm = outside.norm();
      const double inside = std::min(q.maxCoeff(), 0.0);
      if (grad) {
        Eigen::VectorXd g_local = Eigen::VectorXd::Zero(x.size());
        if (outside_norm > 1e-300) {
          for (Eigen::Index i = 0; i < q.size(); ++i)
            if (q[i] > 0.0) g_local[i] = (outside[i] / outside_norm) * (local[i] >= 0.0 ? 1.0 : -1.0);
        } else {
          Eigen::Index j = 0;
          q.maxCoeff(&j);
          g_local[j] = local[j] >= 0.0 ? 1.0 : -1.0;
        }
        *grad = rotate_xy(g_local, angle);
      }
      return outside_norm + inside;
    }
    case Shape::capsule: {
      Eigen::VectorXd axis = Eigen::VectorXd::Zero(x.size());
      axis[0] = std::cos(angle);
      axis[1] = std::sin(angle);
      const double t = std::clamp(w.dot(axis), -size[0], size[0]);
      const Eigen::VectorXd d = w - t * axis;
      const double dn = d.norm();
      if (grad) {
        if (dn > 1e-300)
          *grad = d / dn;
        else
          grad->setZero(x.size());
      }
      return dn - size[1];
    }
  }
  throw ContractViolation("unreachable shape");
}

Box Primitive::bounds() const {
  const int dim = static_cast<int>(center.size());
  Eigen::VectorXd extent = Eigen::VectorXd::Zero(dim);
  switch (shape) {
    case Shape::disk:
      extent.setConstant(size[0]);
      break;
    case Shape::box: {
      const double c = std::abs(std::cos(angle)), s = std::abs(std::sin(angle));
      extent = size;
      extent[0] = c * size[0] + s * size[1];
      extent[1] = s * size[0] + c * size[1];
      break;
    }
    case Shape::capsule: {
      extent.setConstant(size[1]);
      extent[0] = std::abs(std::cos(angle)) * size[0] + size[1];
      extent[1] = std::abs(std::sin(angle)) * size[0] + size[1];
      break;
    }
  }
  return Box{center - extent, center + extent};
}

double Scene::sdf(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  if (primitives.empty()) {
    if (grad) grad->setZero(x.size());
    return 1.0;
  }
  if (primitives.size() == 1) return primitives[0].sdf(x, grad);

  // Smooth minimum: -tau * log sum exp(-d_i / tau), shifted for stability.
  const std::size_t n = primitives.size();
  std::vector<double> d(n);
  std::vector<Eigen::VectorXd> g(grad ? n : 0);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = primitives[i].sdf(x, grad ? &g[i] : nullptr);
    dmin = std::min(dmin, d[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(-(d[i] - dmin) / tau_sdf);
  const double value = dmin - tau_sdf * std::log(sum);
  if (grad) {
    grad->setZero(x.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::exp(-(d[i] - dmin) / tau_sdf) / sum;
      *grad += w * g[i];
    }
  }
  return value;
}

double Scene::occupancy_log_prob(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  if (x.size() != dim()) throw ContractViolation("occupancy_log_prob: point dimension mismatch");
  Eigen::VectorXd sdf_grad;
  const double s = sdf(x, grad ? &sdf_grad : nullptr);
  const double u = s / tau_sdf;
  // log sigma(-u) = -softplus(u)
  const double softplus = std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u)));
  if (grad) {
    const double sigma_u = 1.0 / (1.0 + std::exp(-u));
    *grad = (-sigma_u / tau_sdf) * sdf_grad;
  }
  return -softplus;
}

double Scene::occupancy(const Eigen::VectorXd& x) const {
  return std::exp(occupancy_log_prob(x));
}

Box Scene::primitive_bounding_box() const {
  if (primitives.empty()) return workspace;
  Eigen::VectorXd lo = primitives[0].bounds().lo;
  Eigen::VectorXd hi = primitives[0].bounds().hi;
  for (std::size_t i = 1; i < primitives.size(); ++i) {
    lo = lo.cwiseMin(primitives[i].bounds().lo);
    hi = hi.cwiseMax(primitives[i].bounds().hi);
  }
  return Box{lo.cwiseMax(workspace.lo), hi.cwiseMin(workspace.hi)};
}

void Scene::validate() const {
  if (workspace.lo.size() < 1 || workspace.lo.size() != workspace.hi.size())
    throw ConfigError("scene: malformed workspace box");
  if ((workspace.lo.array() >= workspace.hi.array()).any())
    throw ConfigError("scene: workspace box has empty extent");
  if (tau_sdf <= 0.0) throw ConfigError("scene: tau_sdf must be > 0");
  for (const auto& p : primitives) {
    p.validate(dim());
    if (!workspace.contains(p.center))
      throw ConfigError("scene: primitive " + shape_name(p.shape) +
                        " center lies outside the workspace box");
  }
}

PositionPrior::PositionPrior(std::shared_ptr<const Scene> scene)
    : scene_(std::move(scene)), spec_(ManifoldSpec::euclidean(scene_->dim())) {
  scene_->validate();
}

double PositionPrior::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  spec_.require_dim(point, "point");
  if (!scene_->workspace.contains(point)) {
    if (grad) grad->setZero(point.size());
    return -std::numeric_limits<double>::infinity();
  }
  return scene_->occupancy_log_prob(point, grad);
}

HandPrior::HandPrior(std::shared_ptr<const Scene> scene)
    : scene_(std::move(scene)),
      spec_(ManifoldSpec::euclidean(scene_->dim()).times(ManifoldSpec::sphere(1))) {
  scene_->validate();
}

double HandPrior::eval(const Eigen::VectorXd& point, Eigen::VectorXd* grad) const {
  spec_.require_dim(point, "point");
  const int n = scene_->dim();
  const Eigen::VectorXd x = point.head(n);
  if (grad) grad->setZero(point.size());
  if (!scene_->workspace.contains(x)) return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd position_grad;
  const double value = scene_->occupancy_log_prob(x, grad ? &position_grad : nullptr);
  if (grad) grad->head(n) = position_grad;
  return value;  // uniform orientation adds a constant 0
}

LogDensityPtr hand_prior(std::shared_ptr<const Scene> scene) {
  return std::make_shared<HandPrior>(std::move(scene));
}

SampleBatch sample_position_prior(const Scene& scene, const SamplerConfig& config) {
  scene.validate();
  auto scene_ptr = std::make_shared<const Scene>(scene);
  PositionPrior prior(scene_ptr);
  const ManifoldSpec& spec = prior.domain();
  Rng init_rng = Rng(config.seed).stream("init");
  const Box bbox = scene.primitive_bounding_box();
  const auto init = uniform_inits(spec, {bbox}, config.chains, init_rng);
  return euclidean_hmc(prior, spec, init, config);
}

namespace {

std::vector<double> parse_numbers(const std::vector<std::string>& tokens, std::size_t from,
                                  const std::string& source, int line_no) {
  std::vector<double> values;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(tokens[i], &used));
      if (used != tokens[i].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected a number, got '" +
                       tokens[i] + "'");
    }
  }
  return values;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace

Scene parse_scene(std::istream& in, const std::string& source_name) {
  Scene scene;
  bool saw_header = false;
  bool saw_workspace = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;

    if (!saw_header) {
      if (tokens.size() != 2 || tokens[0] != "scene" || tokens[1] != "v1")
        throw ParseError(source_name + ":" + std::to_string(line_no) +
                         ": expected header 'scene v1'");
      saw_header = true;
      continue;
    }

    if (tokens[0] == "workspace") {
      const auto values = parse_numbers(tokens, 1, source_name, line_no);
      if (values.size() % 2 != 0 || values.empty())
        throw ParseError(source_name + ":" + std::to_string(line_no) +
                         ": workspace needs min/max per axis");
      const int dim = static_cast<int>(values.size() / 2);
      scene.workspace.lo.resize(dim);
      scene.workspace.hi.resize(dim);
      for (int i = 0; i < dim; ++i) {
        scene.workspace.lo[i] = values[2 * i];
        scene.workspace.hi[i] = values[2 * i + 1];
      }
      saw_workspace = true;
    } else if (tokens[0] == "tau") {
      const auto values = parse_numbers(tokens, 1, source_name, line_no);
      if (values.size() != 1)
        throw ParseError(source_name + ":" + std::to_string(line_no) + ": tau takes one value");
      scene.tau_sdf = values[0];
    } else if (tokens[0] == "primitive") {
      if (!saw_workspace)
        throw ParseError(source_name + ":" + std::to_string(line_no) +
                         ": workspace must come before primitives");
      if (tokens.size() < 2)
        throw ParseError(source_name + ":" + std::to_string(line_no) + ": missing shape tag");
      const std::string& tag = tokens[1];
      Primitive prim;
      if (tag == "disk")
        prim.shape = Primitive::Shape::disk;
      else if (tag == "box")
        prim.shape = Primitive::Shape::box;
      else if (tag == "capsule")
        prim.shape = Primitive::Shape::capsule;
      else
        throw ParseError(source_name + ":" + std::to_string(line_no) + ": unknown shape tag '" +
                         tag + "' (expected disk, box or capsule)");
      const auto values = parse_numbers(tokens, 2, source_name, line_no);
      const int dim = scene.dim();
      std::size_t size_count = 0;
      switch (prim.shape) {
        case Primitive::Shape::disk: size_count = 1; break;
        case Primitive::Shape::box: size_count = static_cast<std::size_t>(dim); break;
        case Primitive::Shape::capsule: size_count = 2; break;
      }
      const std::size_t expected = static_cast<std::size_t>(dim) + size_count + 1;
      if (values.size() != expected)
        throw ParseError(source_name + ":" + std::to_string(line_no) + ": " + tag + " expects " +
                         std::to_string(expected) + " numbers (center, sizes, angle), got " +
                         std::to_string(values.size()));
      prim.center = Eigen::Map<const Eigen::VectorXd>(values.data(), dim);
      prim.size = Eigen::Map<const Eigen::VectorXd>(values.data() + dim,
                                                    static_cast<Eigen::Index>(size_count));
      prim.angle = values.back();
      scene.primitives.push_back(std::move(prim));
    } else {
      throw ParseError(source_name + ":" + std::to_string(line_no) + ": unknown directive '" +
                       tokens[0] + "'");
    }
  }
  if (!saw_header) throw ParseError(source_name + ": empty document, expected header 'scene v1'");
  if (!saw_workspace) throw ParseError(source_name + ": missing workspace line");
  scene.validate();
  return scene;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file: " + path);
  return parse_scene(in, path);
}

void write_scene(std::ostream& out, const Scene& scene) {
  out << "scene v1\n";
  out << "workspace";
  for (int i = 0; i < scene.dim(); ++i) out << ' ' << scene.workspace.lo[i] << ' ' << scene.workspace.hi[i];
  out << "\ntau " << scene.tau_sdf << '\n';
  for (const auto& p : scene.primitives) {
    out << "primitive " << shape_name(p.shape);
    for (Eigen::Index i = 0; i < p.center.size(); ++i) out << ' ' << p.center[i];
    for (Eigen::Index i = 0; i < p.size.size(); ++i) out << ' ' << p.size[i];
    out << ' ' << p.angle << '\n';
  }
}

}  // namespace graspinfer
