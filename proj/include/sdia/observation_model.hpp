#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdia/grid_case.hpp"
#include "sdia/linalg.hpp"

namespace sdia {

enum class MeasurementKind { bus_injection, branch_flow };

// Label for one measurement row: which bus injection, or which branch
// from-end flow, the row came from.
struct MeasurementLabel {
  MeasurementKind kind = MeasurementKind::bus_injection;
  int bus_id = 0;        // injection bus, or from-end bus of the flow
  int to_bus_id = -1;    // flow target bus; -1 for injections
  int branch_index = -1; // position in GridCase::branches; -1 for injections
};

struct JacobianResult {
  Matrix H;                            // m x n
  std::vector<MeasurementLabel> labels;
  std::vector<int> state_bus_ids;      // non-slack bus ids, column order
};

// Linearized measurement matrix of the lossless flow model. States are the
// non-slack bus angles in bus order. Rows are every bus injection (bus
// order) followed by every in-service branch from-end flow (branch order).
// A flow row for branch (a, b, x) is +1/x at a's column and -1/x at b's
// column, slack columns omitted; an injection row is the signed sum of the
// incident flow rows, accumulated in branch order.
inline JacobianResult build_jacobian(const GridCase& gc) {
  validate_grid_case(gc);

  const int nbus = static_cast<int>(gc.buses.size());
  auto bus_pos = [&](int id) -> int {
    for (int i = 0; i < nbus; ++i)
      if (gc.buses[i].bus_id == id) return i;
    return -1;
  };

  // Column map: non-slack buses keep their relative order.
  std::vector<int> col_of_pos(nbus, -1);
  std::vector<int> state_bus_ids;
  int n = 0;
  for (int i = 0; i < nbus; ++i) {
    if (gc.buses[i].bus_type != BusType::slack) {
      col_of_pos[i] = n++;
      state_bus_ids.push_back(gc.buses[i].bus_id);
    }
  }

  std::vector<int> live;  // in-service branch positions, file order
  for (int b = 0; b < static_cast<int>(gc.branches.size()); ++b) {
    if (gc.branches[b].in_service) live.push_back(b);
  }
  const int nflow = static_cast<int>(live.size());
  const int m = nbus + nflow;

  Matrix flows = Matrix::Zero(nflow, n);
  for (int r = 0; r < nflow; ++r) {
    const BranchRecord& br = gc.branches[live[r]];
    const double w = 1.0 / br.reactance_x;
    const int cf = col_of_pos[bus_pos(br.from_bus)];
    const int ct = col_of_pos[bus_pos(br.to_bus)];
    if (cf >= 0) flows(r, cf) += w;
    if (ct >= 0) flows(r, ct) -= w;
  }

  Matrix inj = Matrix::Zero(nbus, n);
  for (int r = 0; r < nflow; ++r) {
    const BranchRecord& br = gc.branches[live[r]];
    inj.row(bus_pos(br.from_bus)) += flows.row(r);  // flow leaves the bus
    inj.row(bus_pos(br.to_bus)) -= flows.row(r);
  }

  JacobianResult out;
  out.H = Matrix::Zero(m, n);
  out.H.topRows(nbus) = inj;
  out.H.bottomRows(nflow) = flows;
  out.state_bus_ids = std::move(state_bus_ids);
  out.labels.reserve(m);
  for (int i = 0; i < nbus; ++i) {
    out.labels.push_back({MeasurementKind::bus_injection,
                          gc.buses[i].bus_id, -1, -1});
  }
  for (int r = 0; r < nflow; ++r) {
    const BranchRecord& br = gc.branches[live[r]];
    out.labels.push_back(
        {MeasurementKind::branch_flow, br.from_bus, br.to_bus, live[r]});
  }
  return out;
}

// State prior: unit-variance angles with geometric cross-correlation
// rho^{|i-j|}. rho must lie in [0, 1); the result is then PD for every n.
inline Matrix toeplitz_state_cov(int n, double rho) {
  if (n <= 0) throw validation_error("state dimension must be positive");
  if (!(rho >= 0.0) || rho >= 1.0) {
    throw validation_error("correlation rho must lie in [0, 1)");
  }
  std::vector<double> pw(n);
  pw[0] = 1.0;
  for (int k = 1; k < n; ++k) pw[k] = pw[k - 1] * rho;
  Matrix S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = pw[std::abs(i - j)];
  return S;
}

// Noise variance pinned by the signal-to-noise ratio in dB:
// snr = tr(H Sigma_XX H^T) / (m sigma2).
inline double sigma2_from_snr(const Matrix& H, const Matrix& Sigma_XX,
                              double snr_db) {
  const double trace = (H * Sigma_XX).cwiseProduct(H).sum();
  if (!(trace > 0.0)) {
    throw validation_error(
        "signal power is zero; cannot pin noise variance from SNR");
  }
  const double m = static_cast<double>(H.rows());
  return trace / (m * std::pow(10.0, snr_db / 10.0));
}

// Everything downstream consumes this bundle. Sigma_YY = H Sigma_XX H^T +
// sigma2 I is precomputed once; rho/snr_db are kept for serialization and
// are NaN for models built from raw matrices.
struct ObservationModel {
  std::string name;
  int n = 0;
  int m = 0;
  Matrix H;
  double sigma2 = 0.0;
  Matrix Sigma_XX;
  Matrix Sigma_YY;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double snr_db = std::numeric_limits<double>::quiet_NaN();
};

// Raw-matrix constructor used by tests and synthetic studies. Validates
// shapes and PD of the induced output covariance.
inline ObservationModel make_observation_model(
    std::string name, const Matrix& H, const Matrix& Sigma_XX, double sigma2,
    double rho = std::numeric_limits<double>::quiet_NaN(),
    double snr_db = std::numeric_limits<double>::quiet_NaN()) {
  if (H.rows() == 0 || H.cols() == 0) {
    throw validation_error("measurement matrix must be nonempty");
  }
  if (Sigma_XX.rows() != H.cols() || Sigma_XX.cols() != H.cols()) {
    throw validation_error("state covariance dimension mismatch");
  }
  if (!is_symmetric(Sigma_XX, 1e-12 * std::max(1.0, max_abs(Sigma_XX)))) {
    throw validation_error("state covariance must be symmetric");
  }
  if (!(sigma2 > 0.0)) {
    throw validation_error("noise variance must be positive");
  }
  ObservationModel mod;
  mod.name = std::move(name);
  mod.m = static_cast<int>(H.rows());
  mod.n = static_cast<int>(H.cols());
  mod.H = H;
  mod.sigma2 = sigma2;
  mod.Sigma_XX = Sigma_XX;
  Matrix K = H * Sigma_XX * H.transpose();
  // Strip multiplication asymmetry dust; temp because K aliases both sides.
  K = (0.5 * (K + K.transpose())).eval();
  mod.Sigma_YY = K + sigma2 * Matrix::Identity(mod.m, mod.m);
  mod.rho = rho;
  mod.snr_db = snr_db;
  log_det_pd_or_throw(mod.Sigma_YY, "observation model");
  return mod;
}

// Case -> model: Jacobian, geometric prior, SNR-pinned noise floor.
inline ObservationModel assemble_model(const GridCase& gc, double rho,
                                       double snr_db) {
  const JacobianResult jac = build_jacobian(gc);
  const int n = static_cast<int>(jac.H.cols());
  const Matrix Sxx = toeplitz_state_cov(n, rho);
  const double s2 = sigma2_from_snr(jac.H, Sxx, snr_db);
  return make_observation_model(gc.name, jac.H, Sxx, s2, rho, snr_db);
}

// JSON schema: {name, n, m, H (row-major), sigma2, rho, snr_db}. The state
// prior is reconstructed from (n, rho), so only models with a geometric
// prior are serializable.
inline nlohmann::json model_to_json(const ObservationModel& mod) {
  if (std::isnan(mod.rho)) {
    throw validation_error(
        "model has no geometric prior parameter; cannot serialize");
  }
  std::vector<double> h;
  h.reserve(static_cast<std::size_t>(mod.m) * mod.n);
  for (int i = 0; i < mod.m; ++i)
    for (int j = 0; j < mod.n; ++j) h.push_back(mod.H(i, j));
  nlohmann::json j;
  j["name"] = mod.name;
  j["n"] = mod.n;
  j["m"] = mod.m;
  j["H"] = h;
  j["sigma2"] = mod.sigma2;
  j["rho"] = mod.rho;
  j["snr_db"] = mod.snr_db;
  return j;
}

inline ObservationModel model_from_json(const nlohmann::json& j) {
  try {
    const std::string name = j.at("name").get<std::string>();
    const int n = j.at("n").get<int>();
    const int m = j.at("m").get<int>();
    if (n <= 0 || m <= 0) {
      throw validation_error("model dimensions must be positive");
    }
    const auto h = j.at("H").get<std::vector<double>>();
    if (h.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(n)) {
      throw validation_error("H has " + std::to_string(h.size()) +
                             " entries, expected " + std::to_string(m * n));
    }
    Matrix H(m, n);
    for (int i = 0; i < m; ++i)
      for (int c = 0; c < n; ++c)
        H(i, c) = h[static_cast<std::size_t>(i) * n + c];
    const double sigma2 = j.at("sigma2").get<double>();
    const double rho = j.at("rho").get<double>();
    const double snr_db = j.at("snr_db").get<double>();
    return make_observation_model(name, H, toeplitz_state_cov(n, rho), sigma2,
                                  rho, snr_db);
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("bad model JSON: ") + e.what());
  }
}

}  // namespace sdia
