#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <string>

#include "sdia/builtin_cases.hpp"
#include "sdia/grid_case.hpp"
#include "sdia/observation_model.hpp"

using sdia::Matrix;
using sdia::Vector;

namespace {

const std::string kToyCase = R"(function mpc = toy3
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	345	1	1.1	0.9;
	2	1	10	0	0	0	1	1	0	345	1	1.1	0.9;
	3	1	20	0	0	0	1	1	0	345	1	1.1	0.9;
];
mpc.gen = [
	1	50	0	300	-300	1	100	1	250	10;
];
mpc.branch = [
	1	2	0.01	0.1	0	250	250	250	0	0	1	-360	360;
	2	3	0.02	0.25	0	250	250	250	0	0	1	-360	360;
	1	3	0.01	0.2	0	250	250	250	0	0	0	-360	360;
];
)";

// Reduced weighted graph Laplacian accumulated in branch order; the
// injection block of the measurement matrix must reproduce it exactly.
Matrix laplacian_oracle(const sdia::GridCase& gc) {
  const int nbus = static_cast<int>(gc.buses.size());
  auto pos = [&](int id) {
    for (int i = 0; i < nbus; ++i)
      if (gc.buses[i].bus_id == id) return i;
    return -1;
  };
  Matrix L = Matrix::Zero(nbus, nbus);
  for (const auto& br : gc.branches) {
    if (!br.in_service) continue;
    const double w = 1.0 / br.reactance_x;
    const int a = pos(br.from_bus), b = pos(br.to_bus);
    L(a, a) += w;
    L(a, b) -= w;
    L(b, a) -= w;
    L(b, b) += w;
  }
  return L;
}

Matrix injection_block_vs_laplacian_diff(const sdia::GridCase& gc) {
  const auto jac = sdia::build_jacobian(gc);
  const int nbus = static_cast<int>(gc.buses.size());
  const Matrix L = laplacian_oracle(gc);
  // Map state columns back to bus positions.
  std::vector<int> col_to_pos;
  for (int i = 0; i < nbus; ++i) {
    if (gc.buses[i].bus_type != sdia::BusType::slack) col_to_pos.push_back(i);
  }
  Matrix expected(nbus, col_to_pos.size());
  for (int i = 0; i < nbus; ++i)
    for (std::size_t c = 0; c < col_to_pos.size(); ++c)
      expected(i, c) = L(i, col_to_pos[c]);
  return jac.H.topRows(nbus) - expected;
}

}  // namespace

TEST_CASE("parser reads the toy case subset") {
  const sdia::GridCase gc = sdia::parse_case(kToyCase);
  CHECK(gc.name == "toy3");
  REQUIRE(gc.buses.size() == 3);
  REQUIRE(gc.branches.size() == 3);
  CHECK(gc.buses[0].bus_type == sdia::BusType::slack);
  CHECK(gc.buses[1].bus_type == sdia::BusType::pq);
  CHECK(gc.branches[0].from_bus == 1);
  CHECK(gc.branches[0].to_bus == 2);
  CHECK(gc.branches[0].reactance_x == 0.1);
  CHECK(gc.branches[0].in_service);
  CHECK_FALSE(gc.branches[2].in_service);
}

TEST_CASE("parser rejects malformed input with line numbers") {
  SECTION("nonpositive reactance") {
    std::string bad = kToyCase;
    const auto at = bad.find("0.25");
    bad.replace(at, 4, "0.00");
    try {
      sdia::parse_case(bad);
      FAIL("expected validation_error");
    } catch (const sdia::validation_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("nonpositive reactance") != std::string::npos);
      CHECK(msg.find("line 14") != std::string::npos);
    }
  }
  SECTION("non-numeric field") {
    std::string bad = kToyCase;
    const auto at = bad.find("0.25");
    bad.replace(at, 4, "oops");
    try {
      sdia::parse_case(bad);
      FAIL("expected validation_error");
    } catch (const sdia::validation_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("oops") != std::string::npos);
      CHECK(msg.find("line 14") != std::string::npos);
    }
  }
  SECTION("too few branch columns") {
    const std::string bad =
        "function mpc = x\nmpc.bus = [\n1 3;\n2 1;\n];\nmpc.branch = [\n"
        "1 2 0.0;\n];\n";
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("duplicate bus id") {
    std::string bad = kToyCase;
    const auto at = bad.find("\t3\t1\t20");
    bad.replace(at, 4, "\t2\t1");
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("no slack bus") {
    std::string bad = kToyCase;
    const auto at = bad.find("\t1\t3\t0");
    bad.replace(at, 4, "\t1\t1");
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("two slack buses") {
    std::string bad = kToyCase;
    const auto at = bad.find("\t2\t1\t10");
    bad.replace(at, 4, "\t2\t3");
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("branch endpoint not a bus") {
    std::string bad = kToyCase;
    const auto at = bad.find("\t2\t3\t0.02");
    bad.replace(at, 4, "\t2\t9");
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("self-loop branch") {
    std::string bad = kToyCase;
    const auto at = bad.find("\t2\t3\t0.02");
    bad.replace(at, 4, "\t2\t2");
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
  SECTION("disconnected in-service network") {
    // The only branch reaching bus 3 is out of service (status column 0).
    const std::string bad =
        "function mpc = x\nmpc.bus = [\n1 3;\n2 1;\n3 1;\n];\n"
        "mpc.branch = [\n1 2 0.0 0.1;\n2 3 0.0 0.2 0 0 0 0 0 0 0;\n];\n";
    CHECK_THROWS_AS(sdia::parse_case(bad), sdia::validation_error);
  }
}

TEST_CASE("serializer round-trips exactly") {
  const sdia::GridCase gc = sdia::parse_case(kToyCase);
  const std::string text = sdia::serialize_case(gc);
  const sdia::GridCase back = sdia::parse_case(text);
  CHECK(back == gc);

  for (auto name : sdia::builtin_case_names()) {
    const sdia::GridCase orig =
        sdia::parse_case(std::string(*sdia::builtin_case_text(name)));
    const sdia::GridCase round = sdia::parse_case(sdia::serialize_case(orig));
    CHECK(round == orig);
  }
}

TEST_CASE("bundled cases have the reference dimensions") {
  struct Expect {
    const char* name;
    int buses, branches, m, n;
  };
  for (const auto& e : {Expect{"ieee9", 9, 9, 18, 8},
                        Expect{"ieee14", 14, 20, 34, 13},
                        Expect{"ieee30", 30, 41, 71, 29}}) {
    const auto text = sdia::builtin_case_text(e.name);
    REQUIRE(text);
    const sdia::GridCase gc = sdia::parse_case(std::string(*text), e.name);
    CHECK(gc.name == e.name);
    CHECK(static_cast<int>(gc.buses.size()) == e.buses);
    CHECK(static_cast<int>(gc.branches.size()) == e.branches);
    const auto jac = sdia::build_jacobian(gc);
    CHECK(jac.H.rows() == e.m);
    CHECK(jac.H.cols() == e.n);
  }
  CHECK_FALSE(sdia::builtin_case_text("ieee118"));
}

TEST_CASE("two-bus measurement matrix is the frozen reference") {
  sdia::GridCase gc;
  gc.name = "pair";
  gc.buses = {{1, sdia::BusType::slack}, {2, sdia::BusType::pq}};
  gc.branches = {{1, 2, 0.5, true}};
  const auto jac = sdia::build_jacobian(gc);
  REQUIRE(jac.H.rows() == 3);
  REQUIRE(jac.H.cols() == 1);
  CHECK(jac.H(0, 0) == -2.0);  // injection at the slack bus
  CHECK(jac.H(1, 0) == 2.0);   // injection at bus 2
  CHECK(jac.H(2, 0) == -2.0);  // from-end flow on branch 1-2
  REQUIRE(jac.labels.size() == 3);
  CHECK(jac.labels[0].kind == sdia::MeasurementKind::bus_injection);
  CHECK(jac.labels[0].bus_id == 1);
  CHECK(jac.labels[2].kind == sdia::MeasurementKind::branch_flow);
  CHECK(jac.labels[2].bus_id == 1);
  CHECK(jac.labels[2].to_bus_id == 2);
  CHECK(jac.state_bus_ids == std::vector<int>{2});
}

TEST_CASE("injection rows equal the reduced Laplacian exactly") {
  for (auto name : sdia::builtin_case_names()) {
    const sdia::GridCase gc =
        sdia::parse_case(std::string(*sdia::builtin_case_text(name)));
    const Matrix diff = injection_block_vs_laplacian_diff(gc);
    CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("injection columns sum to the slack row within rounding") {
  // Column sums of the full Laplacian vanish, so each injection column must
  // cancel to rounding residue.
  const sdia::GridCase gc =
      sdia::parse_case(std::string(*sdia::builtin_case_text("ieee30")));
  const auto jac = sdia::build_jacobian(gc);
  const Matrix inj = jac.H.topRows(gc.buses.size());
  const double scale = jac.H.cwiseAbs().maxCoeff();
  for (int c = 0; c < inj.cols(); ++c) {
    CHECK(std::abs(inj.col(c).sum()) <= 1e-12 * scale);
  }
}

TEST_CASE("out-of-service branches are excluded from measurements") {
  const sdia::GridCase gc = sdia::parse_case(kToyCase);
  const auto jac = sdia::build_jacobian(gc);
  CHECK(jac.H.rows() == 3 + 2);  // 3 injections + 2 live flows
  for (const auto& lab : jac.labels) {
    if (lab.kind == sdia::MeasurementKind::branch_flow) {
      CHECK(lab.branch_index != 2);  // the out-of-service branch
    }
  }
}

TEST_CASE("relabelling bus order permutes rows and columns correspondingly") {
  const sdia::GridCase gc =
      sdia::parse_case(std::string(*sdia::builtin_case_text("ieee9")));
  sdia::GridCase shuffled = gc;
  std::mt19937_64 rng(20240817);
  std::shuffle(shuffled.buses.begin(), shuffled.buses.end(), rng);

  const auto j1 = sdia::build_jacobian(gc);
  const auto j2 = sdia::build_jacobian(shuffled);

  auto inj_row = [](const sdia::JacobianResult& j, int bus_id) {
    for (std::size_t r = 0; r < j.labels.size(); ++r) {
      if (j.labels[r].kind == sdia::MeasurementKind::bus_injection &&
          j.labels[r].bus_id == bus_id)
        return static_cast<int>(r);
    }
    return -1;
  };
  auto col_of = [](const sdia::JacobianResult& j, int bus_id) {
    for (std::size_t c = 0; c < j.state_bus_ids.size(); ++c) {
      if (j.state_bus_ids[c] == bus_id) return static_cast<int>(c);
    }
    return -1;
  };

  for (const auto& bus : gc.buses) {
    const int r1 = inj_row(j1, bus.bus_id);
    const int r2 = inj_row(j2, bus.bus_id);
    for (int state_bus : j1.state_bus_ids) {
      CHECK(j1.H(r1, col_of(j1, state_bus)) ==
            j2.H(r2, col_of(j2, state_bus)));
    }
  }
  // Flow rows keep branch order; only their columns move.
  const int nbus = static_cast<int>(gc.buses.size());
  for (int r = 0; r < static_cast<int>(gc.branches.size()); ++r) {
    for (int state_bus : j1.state_bus_ids) {
      CHECK(j1.H(nbus + r, col_of(j1, state_bus)) ==
            j2.H(nbus + r, col_of(j2, state_bus)));
    }
  }
}

TEST_CASE("geometric state prior") {
  SECTION("rho zero gives the identity exactly") {
    const Matrix S = sdia::toeplitz_state_cov(4, 0.0);
    CHECK((S - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("reference entries at rho 0.9") {
    const Matrix S = sdia::toeplitz_state_cov(3, 0.9);
    CHECK(S(0, 0) == 1.0);
    CHECK(S(0, 1) == Catch::Approx(0.9).margin(1e-15));
    CHECK(S(0, 2) == Catch::Approx(0.81).margin(1e-15));
    CHECK(S(2, 0) == S(0, 2));
  }
  SECTION("positive definite across sizes") {
    for (int n : {2, 5, 17}) {
      for (double rho : {0.0, 0.5, 0.95}) {
        const Matrix S = sdia::toeplitz_state_cov(n, rho);
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        CHECK(es.eigenvalues()(0) > 0.0);
      }
    }
  }
  SECTION("rejects out-of-range correlation") {
    CHECK_THROWS_AS(sdia::toeplitz_state_cov(3, -0.1), sdia::validation_error);
    CHECK_THROWS_AS(sdia::toeplitz_state_cov(3, 1.0), sdia::validation_error);
    CHECK_THROWS_AS(sdia::toeplitz_state_cov(3, 1.5), sdia::validation_error);
    CHECK_THROWS_AS(sdia::toeplitz_state_cov(0, 0.5), sdia::validation_error);
  }
}

TEST_CASE("noise variance pinned by SNR") {
  const Matrix H = Matrix::Identity(2, 2);
  const Matrix Sxx = Matrix::Identity(2, 2);
  CHECK(sdia::sigma2_from_snr(H, Sxx, 0.0) == 1.0);
  CHECK(sdia::sigma2_from_snr(H, Sxx, 30.0) == 0.001);
  CHECK(sdia::sigma2_from_snr(H, Sxx, -10.0) == Catch::Approx(10.0));
  CHECK_THROWS_AS(sdia::sigma2_from_snr(Matrix::Zero(2, 2), Sxx, 10.0),
                  sdia::validation_error);
}

TEST_CASE("assembled bundled model matches the pinned fixture") {
  const sdia::GridCase gc =
      sdia::parse_case(std::string(*sdia::builtin_case_text("ieee9")));
  const sdia::ObservationModel mod = sdia::assemble_model(gc, 0.9, 30.0);
  CHECK(mod.m == 18);
  CHECK(mod.n == 8);
  CHECK(mod.sigma2 == Catch::Approx(0.17395163767193356).epsilon(1e-14));

  // Output covariance identity and strict PD floor at sigma2.
  const Matrix Kraw = mod.H * mod.Sigma_XX * mod.H.transpose();
  const Matrix K = 0.5 * (Kraw + Kraw.transpose());
  const Matrix expected =
      K + mod.sigma2 * Matrix::Identity(mod.m, mod.m);
  CHECK((mod.Sigma_YY - expected).cwiseAbs().maxCoeff() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(mod.Sigma_YY);
  CHECK(es.eigenvalues()(0) >= mod.sigma2 * (1.0 - 1e-12));
}

TEST_CASE("model JSON round-trip is exact") {
  const sdia::ObservationModel mod = sdia::assemble_model(
      sdia::parse_case(std::string(*sdia::builtin_case_text("ieee9"))), 0.9,
      20.0);
  const auto j = sdia::model_to_json(mod);
  const sdia::ObservationModel back = sdia::model_from_json(j);
  CHECK(back.name == mod.name);
  CHECK(back.m == mod.m);
  CHECK(back.n == mod.n);
  CHECK(back.sigma2 == mod.sigma2);
  CHECK((back.H - mod.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Sigma_YY - mod.Sigma_YY).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model JSON validation") {
  const sdia::GridCase gc = sdia::parse_case(kToyCase);
  const sdia::ObservationModel mod = sdia::assemble_model(gc, 0.5, 10.0);
  auto j = sdia::model_to_json(mod);
  SECTION("H length mismatch") {
    auto bad = j;
    auto h = bad["H"].get<std::vector<double>>();
    h.pop_back();
    bad["H"] = h;
    CHECK_THROWS_AS(sdia::model_from_json(bad), sdia::validation_error);
  }
  SECTION("missing field") {
    auto bad = j;
    bad.erase("sigma2");
    CHECK_THROWS_AS(sdia::model_from_json(bad), sdia::validation_error);
  }
  SECTION("nonpositive dimensions") {
    auto bad = j;
    bad["n"] = 0;
    CHECK_THROWS_AS(sdia::model_from_json(bad), sdia::validation_error);
  }
  SECTION("synthetic model without a prior parameter is not serializable") {
    const sdia::ObservationModel raw = sdia::make_observation_model(
        "raw", Matrix::Identity(2, 2), Matrix::Identity(2, 2), 1.0);
    CHECK_THROWS_AS(sdia::model_to_json(raw), sdia::validation_error);
  }
}
