#include "mectune/stability_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mectune/errors.hpp"

namespace mectune {

namespace {

constexpr int kMaxSweeps = 20000;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Largest violation of 0 in the subdifferential of f_S at w with multipliers u.
double optimality_violation(const ToyTask& t, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& u) {
  const double k = static_cast<double>(t.k());
  const double c = 1.0 - t.alpha;
  Eigen::VectorXd stat = 2.0 * c * (w - t.w0);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.k(); ++i) {
    const auto& z = t.samples[i];
    stat += u[i] * z.x / k;
    const double r = z.x.dot(w) - z.y;
    worst = std::max(worst, std::max(0.0, std::abs(u[i]) - 1.0));
    if (z.x.squaredNorm() == 0.0) continue;
    // |u| < 1 requires r == 0; |u| == 1 requires r to carry the sign of u (or vanish).
    if (std::abs(u[i]) < 1.0)
      worst = std::max(worst, std::abs(r));
    else
      worst = std::max(worst, std::max(0.0, -u[i] * r));
  }
  return std::max(worst, stat.norm());
}

nlohmann::json serialize(const ToyTask& t, std::size_t i, const Sample& z) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["alpha"] = t.alpha;
  j["L"] = t.lipschitz;
  j["w0"] = vec(t.w0);
  j["samples"] = nlohmann::json::array();
  for (const auto& s : t.samples) j["samples"].push_back({{"x", vec(s.x)}, {"y", s.y}});
  j["replaced_index"] = i;
  j["replacement"] = {{"x", vec(z.x)}, {"y", z.y}};
  return j;
}

Eigen::VectorXd unit_direction(std::size_t dim, Rng& rng) {
  Eigen::VectorXd v(dim);
  do {
    for (std::size_t j = 0; j < dim; ++j) v[j] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Eigen::VectorXd in_ball(std::size_t dim, double radius, Rng& rng) {
  return unit_direction(dim, rng) * radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
}

}  // namespace

void ToyTask::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("ToyTask.alpha must be >= 0");
  if (!(alpha < 1.0)) throw DomainError("ToyTask.alpha must be < 1: the regularizer vanishes");
  if (k() < 2) throw ValidationError("ToyTask needs at least 2 samples");
  if (!(lipschitz >= 0.0)) throw ValidationError("ToyTask.L must be >= 0");
  for (std::size_t i = 0; i < k(); ++i) {
    if (samples[i].x.size() != w0.size()) throw ValidationError("ToyTask: feature dimension mismatch");
    if (samples[i].x.norm() > lipschitz * (1.0 + 1e-12))
      throw ValidationError("ToyTask: sample " + std::to_string(i) + " has ||x|| > L");
  }
}

double sample_loss(const Eigen::VectorXd& w, const Sample& z) { return std::abs(w.dot(z.x) - z.y); }

double finetune_objective(const ToyTask& task, const Eigen::VectorXd& w) {
  double s = 0.0;
  for (const auto& z : task.samples) s += sample_loss(w, z);
  return s / static_cast<double>(task.k()) + (1.0 - task.alpha) * (w - task.w0).squaredNorm();
}

Eigen::VectorXd finetune_subgradient(const ToyTask& task, const Eigen::VectorXd& w) {
  Eigen::VectorXd g = 2.0 * (1.0 - task.alpha) * (w - task.w0);
  for (const auto& z : task.samples) g += sign(w.dot(z.x) - z.y) * z.x / static_cast<double>(task.k());
  return g;
}

FinetuneResult masked_finetune(const ToyTask& task) {
  task.validate();
  const std::size_t k = task.k();
  const double c = 1.0 - task.alpha;
  const double ck2 = 2.0 * c * static_cast<double>(k);

  // Dual: w(u) = w0 - sum u_i x_i / (2ck), u in [-1,1]^k; exact coordinate maximization.
  FinetuneResult res;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  Eigen::VectorXd w = task.w0;
  for (int sweep = 1; sweep <= kMaxSweeps; ++sweep) {
    res.sweeps = sweep;
    double moved = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& z = task.samples[i];
      const double nx2 = z.x.squaredNorm();
      if (nx2 == 0.0) continue;
      const double r = z.x.dot(w) - z.y;
      const double next = std::clamp(u[i] + ck2 * r / nx2, -1.0, 1.0);
      const double delta = next - u[i];
      if (delta == 0.0) continue;
      u[i] = next;
      w -= delta * z.x / ck2;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-12) break;
  }
  res.w = w;
  res.dual = u;
  res.certificate = optimality_violation(task, w, u);

  // Polish: interior multipliers pin their samples to zero residual.
  std::vector<std::size_t> Z;
  Eigen::VectorXd fixed_sum = Eigen::VectorXd::Zero(task.w0.size());
  for (std::size_t i = 0; i < k; ++i) {
    if (task.samples[i].x.squaredNorm() > 0.0 && std::abs(u[i]) < 1.0 - 1e-9)
      Z.push_back(i);
    else
      fixed_sum += u[i] * task.samples[i].x;
  }
  const Eigen::VectorXd p = task.w0 - fixed_sum / ck2;
  Eigen::VectorXd wp = p;
  Eigen::VectorXd up = u;
  if (!Z.empty()) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(Z.size()), task.w0.size());
    Eigen::VectorXd yz(static_cast<Eigen::Index>(Z.size()));
    for (std::size_t r = 0; r < Z.size(); ++r) {
      X.row(static_cast<Eigen::Index>(r)) = task.samples[Z[r]].x.transpose();
      yz[static_cast<Eigen::Index>(r)] = task.samples[Z[r]].y;
    }
    const Eigen::MatrixXd G = X * X.transpose();
    const Eigen::VectorXd a = G.completeOrthogonalDecomposition().solve(yz - X * p);
    wp = p + X.transpose() * a;
    for (std::size_t r = 0; r < Z.size(); ++r) up[static_cast<Eigen::Index>(Z[r])] = -ck2 * a[static_cast<Eigen::Index>(r)];
  }
  const double cert = optimality_violation(task, wp, up);
  if (cert <= res.certificate) {
    res.w = wp;
    res.dual = up;
    res.certificate = cert;
  }
  return res;
}

ReplaceOneResult replace_one_gap(const ToyTask& task, const Eigen::VectorXd& w_full,
                                 std::size_t i, const Sample& replacement) {
  if (i >= task.k()) throw ValidationError("replace_one_gap: index out of range");
  if (replacement.x.norm() > task.lipschitz * (1.0 + 1e-12))
    throw ValidationError("replace_one_gap: replacement has ||x|| > L");
  ToyTask swapped = task;
  swapped.samples[i] = replacement;
  const Eigen::VectorXd w_swap = masked_finetune(swapped).w;
  const auto& zi = task.samples[i];
  return {std::abs(sample_loss(w_full, zi) - sample_loss(w_swap, zi)), (w_swap - w_full).norm()};
}

ReplaceOneResult replace_one_gap(const ToyTask& task, std::size_t i, const Sample& replacement) {
  return replace_one_gap(task, masked_finetune(task).w, i, replacement);
}

double stability_bound(double lipschitz, double alpha, std::size_t k) {
  return 2.0 * lipschitz * lipschitz / ((1.0 - alpha) * static_cast<double>(k));
}

double parameter_distance_bound(double lipschitz, double alpha, std::size_t k) {
  return 2.0 * lipschitz / ((1.0 - alpha) * static_cast<double>(k));
}

ToyTask make_toy_task(const ToyTaskParams& p, Rng& rng) {
  ToyTask t;
  t.alpha = p.alpha;
  t.lipschitz = p.lipschitz;
  Eigen::VectorXd w_true(static_cast<Eigen::Index>(p.dim));
  for (auto& v : w_true) v = rng.normal();
  t.w0 = w_true;
  for (auto& v : t.w0) v += 0.5 * rng.normal();
  for (std::size_t i = 0; i < p.k; ++i) {
    Sample z;
    z.x = in_ball(p.dim, p.lipschitz, rng);
    z.y = w_true.dot(z.x) + p.noise * rng.normal();
    t.samples.push_back(std::move(z));
  }
  return t;
}

Sample draw_replacement(const ToyTask& task, std::size_t i, bool adversarial, Rng& rng) {
  const std::size_t dim = static_cast<std::size_t>(task.w0.size());
  Sample z;
  if (!adversarial) {
    z.x = in_ball(dim, task.lipschitz, rng);
    z.y = task.w0.dot(z.x) + rng.normal();
    return z;
  }
  const auto& zi = task.samples[i];
  const Eigen::VectorXd dir = zi.x.norm() > 0.0 ? Eigen::VectorXd(zi.x / zi.x.norm())
                                                : unit_direction(dim, rng);
  z.x = -task.lipschitz * dir;
  // Label on the side that makes the replacement pull along the same
  // direction z_i pushed, which maximizes the parameter shift.
  const double s = sign(zi.x.dot(task.w0) - zi.y);
  z.y = z.x.dot(task.w0) - (s == 0.0 ? 1.0 : s) * 5.0 * task.lipschitz * std::max(1.0, task.w0.norm());
  return z;
}

std::vector<StabilityReport> verify_as_bound(const StabilityGrid& grid) {
  if (grid.ks.empty() || grid.alphas.empty() || grid.lipschitz.empty() || grid.trials < 1)
    throw ValidationError("verify_as_bound: grids must be nonempty");
  std::vector<StabilityReport> out;
  std::uint64_t cell = 0;
  for (std::size_t k : grid.ks)
    for (double alpha : grid.alphas)
      for (double L : grid.lipschitz) {
        StabilityReport rep;
        rep.k = k;
        rep.alpha = alpha;
        rep.lipschitz = L;
        rep.bound = stability_bound(L, alpha, k);
        rep.param_bound = parameter_distance_bound(L, alpha, k);
        for (int trial = 0; trial < grid.trials; ++trial) {
          Rng rng(mix_seed(grid.seed, cell), static_cast<std::uint64_t>(trial));
          const ToyTask task = make_toy_task({k, grid.dim, alpha, L, 0.1}, rng);
          const std::size_t i = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(k) - 1));
          const Sample z = draw_replacement(task, i, trial % 2 == 1, rng);
          const auto r = replace_one_gap(task, i, z);
          rep.gaps.push_back(r.gap);
          if (r.gap > rep.max_gap) {
            rep.max_gap = r.gap;
            rep.trial = trial;
          }
          rep.max_param_dist = std::max(rep.max_param_dist, r.param_dist);
          if (r.gap > rep.bound + 1e-8 || r.param_dist > rep.param_bound + 1e-8) {
            ++rep.violation_count;
            std::ostringstream os;
            os << "stability bound violated (k=" << k << ", alpha=" << alpha << ", L=" << L
               << ", trial=" << trial << ", gap=" << r.gap << ", bound=" << rep.bound
               << ", dist=" << r.param_dist << ", dist_bound=" << rep.param_bound
               << "): " << serialize(task, i, z).dump();
            throw SolverError(os.str());
          }
        }
        rep.ratio = rep.max_gap / rep.bound;
        out.push_back(std::move(rep));
        ++cell;
      }
  return out;
}

std::string stability_csv(const std::vector<StabilityReport>& reports) {
  std::ostringstream os;
  os << "k,alpha,L,trial,max_gap,bound,ratio\n";
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d,%.17g,%.17g,%.17g\n", r.k, r.alpha,
                  r.lipschitz, r.trial, r.max_gap, r.bound, r.ratio);
    os << buf;
  }
  return os.str();
}

double mask_regularizer_mean(std::size_t dim, double alpha, int draws, Rng& rng) {
  double acc = 0.0;
  for (int d = 0; d < draws; ++d) {
    const Eigen::VectorXd v = unit_direction(dim, rng);
    double kept = 0.0;
    for (std::size_t j = 0; j < dim; ++j)
      if (rng.uniform() >= alpha) kept += v[static_cast<Eigen::Index>(j)] * v[static_cast<Eigen::Index>(j)];
    acc += kept;
  }
  return acc / draws;
}

}  // namespace mectune
