#include "optosync/covariance.hpp"

#include "optosync/csv.hpp"

#include <ostream>

namespace optosync {

std::string_view to_string(DriftConvention c) {
  switch (c) {
    case DriftConvention::Corrected: return "corrected";
    case DriftConvention::PaperLiteral: return "paper";
  }
  return "?";
}

DriftConvention parse_drift_convention(std::string_view s) {
  if (s == "corrected") return DriftConvention::Corrected;
  if (s == "paper") return DriftConvention::PaperLiteral;
  throw ConfigError("drift_mode must be corrected or paper, got '" + std::string(s) + "'");
}

Matrix6d diffusion_matrix(const SystemParams& p) {
  Vector6d d;
  d << 0.0, p.gamma * (2.0 * p.n_bar + 1.0), p.Gamma_a, p.Gamma_a, p.kappa, p.kappa;
  return d.asDiagonal();
}

CovMatrix6 initial_covariance(double n_bar) {
  if (!(n_bar >= 0.0) || !std::isfinite(n_bar)) {
    throw std::invalid_argument("initial_covariance: n_bar must be finite and >= 0");
  }
  Vector6d d;
  d << n_bar + 0.5, n_bar + 0.5, 0.5, 0.5, 0.5, 0.5;
  return d.asDiagonal();
}

JointSeries propagate_joint(const SystemParams& params, const MeanFieldState<double>& initial,
                            const CovMatrix6& V0, double t_end, const JointConfig& cfg) {
  validate(params);
  if (!(t_end > initial.t)) throw std::invalid_argument("propagate_joint: t_end must exceed start");
  if (cfg.check_physicality) {
    const auto r = check_physicality(V0);
    if (!r.ok(cfg.symmetry_rel_tol, cfg.physicality_tol)) {
      throw PhysicalityError("initial covariance is not physical", initial.t, r);
    }
  }

  using State = Eigen::Matrix<double, 42, 1>;
  const Matrix6d D = cfg.zero_diffusion ? Matrix6d::Zero() : diffusion_matrix(params);
  const DriftConvention drift = cfg.drift;

  State y;
  y.head<6>() = initial.x;
  Eigen::Map<Matrix6d>(y.data() + 6) = V0;

  auto f = [&](double, const State& s) -> State {
    const Vector6d x = s.head<6>();
    const Eigen::Map<const Matrix6d> V(s.data() + 6);
    const Matrix6d A = drift_matrix(x, params, drift);
    State ds;
    ds.head<6>() = rhs(x, params);
    Eigen::Map<Matrix6d>(ds.data() + 6).noalias() = A * V + V * A.transpose() + D;
    return ds;
  };
  auto symmetrize = [](State& s) {
    Eigen::Map<Matrix6d> V(s.data() + 6);
    const Matrix6d sym = 0.5 * (V + V.transpose());
    V = sym;
  };

  JointSeries out;
  out.worst_min_eigenvalue = std::numeric_limits<double>::infinity();
  auto observe = [&](double t, const State& s) {
    const Matrix6d V = Eigen::Map<const Matrix6d>(s.data() + 6);
    if (cfg.check_physicality) {
      const auto r = check_physicality(V);
      out.worst_min_eigenvalue = std::min(out.worst_min_eigenvalue, r.min_uncertainty_eigenvalue);
      if (r.scale > 0.0) {
        out.worst_relative_symmetry = std::max(out.worst_relative_symmetry, r.symmetric_defect / r.scale);
      }
      if (!r.ok(cfg.symmetry_rel_tol, cfg.physicality_tol)) {
        throw PhysicalityError("covariance left the physical set", t, r);
      }
    }
    out.trajectory.t.push_back(t);
    out.trajectory.x.push_back(s.head<6>());
    out.covariance.push_back(V);
  };

  out.trajectory.solver = integrate_ode(f, initial.t, y, t_end, cfg.solver, observe, symmetrize);
  return out;
}

std::array<double, 21> upper_triangle(const CovMatrix6& V) {
  std::array<double, 21> out{};
  std::size_t k = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) out[k++] = V(i, j);
  }
  return out;
}

void write_covariance_csv(std::ostream& out, const std::vector<double>& t,
                          const std::vector<CovMatrix6>& covariance) {
  if (t.size() != covariance.size()) throw std::invalid_argument("write_covariance_csv: size mismatch");
  auto header = covariance_entry_names();
  header.insert(header.begin(), "t");
  CsvWriter csv(out, header);
  for (std::size_t i = 0; i < t.size(); ++i) {
    csv << t[i];
    for (double v : upper_triangle(covariance[i])) csv << v;
    csv.end_row();
  }
}

}  // namespace optosync
