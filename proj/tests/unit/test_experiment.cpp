#include "ipsukf/errors.hpp"
#include "ipsukf/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ipsukf;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "name": "tiny",
  "model": {"type": "linear_chain", "masses": [1, 1], "dampings": [0.5, 0.5],
            "stiffnesses": [3, 4.5]},
  "excitation": [{"kind": "white_noise", "dof": 2, "mean": 0, "variance": 4, "seed": 0}],
  "unknown_input_dofs": [2],
  "layout": {"displacements": true, "velocities": true, "accelerations": true},
  "noise": {"rms_ratio": 0.05},
  "filter": {"q_diag": 1e-9, "r_diag": 1e-3, "dt": 0.01, "duration": 4.0},
  "metrics": {"window": 1.0},
  "seeds": [1, 2]
})";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    config_from_json(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  if (pos == std::string::npos) throw std::logic_error("pattern missing: " + from);
  return s.replace(pos, from.size(), to);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ipsukf_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, MinimalParsesWithDefaults) {
  const ExperimentConfig c = config_from_json(kMinimal);
  EXPECT_EQ(c.model.n_dof(), 2);
  EXPECT_EQ(c.unknown_input_dofs, std::vector<int>{1});
  EXPECT_EQ(c.filter.q_diag.size(), 8);
  EXPECT_EQ(c.filter.r_diag.size(), 6);
  EXPECT_DOUBLE_EQ(c.init.parameters(2), 1.5);
  EXPECT_DOUBLE_EQ(c.init.p0_parameters(0), 1.0);
  EXPECT_DOUBLE_EQ(c.init.p0_states(0), 1e-2);
  EXPECT_EQ(c.excitation.components.at(0).dof, 1);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RoundTripIsStable) {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    const std::string once = config_to_json(c);
    EXPECT_EQ(config_to_json(config_from_json(once)), once) << name;
  }
}

TEST(Config, ErrorsNameTheField) {
  const std::string s(kMinimal);
  EXPECT_NE(error_of(replace(s, "\"q_diag\": 1e-9", "\"q_diag\": [1, 2]")).find("filter.q_diag"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"masses\": [1, 1]", "\"masses\": [1, -1]")).find("masses"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"dof\": 2", "\"dof\": 5")).find("excitation[0]"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"unknown_input_dofs\": [2]", "\"unknown_input_dofs\": [0]"))
                .find("unknown_input_dofs"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"accelerations\": true", "\"accelerations\": false"))
                .find("layout.accelerations"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"duration\": 4.0", "\"duration\": 4.005")).find("duration"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"window\": 1.0", "\"window\": 9.0")).find("metrics.window"),
            std::string::npos);
  EXPECT_NE(error_of(replace(s, "\"linear_chain\"", "\"tri_chain\"")).find("model.type"),
            std::string::npos);
  EXPECT_FALSE(error_of("{ not json").empty());
}

TEST(Config, UnknownPreset) { EXPECT_THROW(preset("nope"), ConfigError); }

TEST(Presets, LinearPulseMatchesReferenceSetup) {
  const ExperimentConfig c = preset("linear3dof-pulse");
  const StructuralMatrices s = c.truth().matrices();
  Matrix K(3, 3), C(3, 3);
  K << 20, -11, 0, -11, 24, -13, 0, -13, 13;
  C << 0.75, -0.5, 0, -0.5, 1.25, -0.75, 0, -0.75, 0.75;
  EXPECT_EQ(s.stiffness, K);
  EXPECT_EQ(s.damping, C);
  EXPECT_EQ(s.mass, Vector::Ones(3));
  EXPECT_EQ(c.filter.q_diag, Vector::Constant(12, 1e-9));
  EXPECT_EQ(c.filter.r_diag, Vector::Constant(9, 1e-3));
  EXPECT_DOUBLE_EQ(c.filter.dt, 0.01);
  EXPECT_DOUBLE_EQ(c.filter.duration, 30.0);
  EXPECT_DOUBLE_EQ(c.noise_rms_ratio, 0.05);
  ASSERT_EQ(c.excitation.components.size(), 1u);
  const auto& p = c.excitation.components[0];
  EXPECT_EQ(p.kind, ExcitationComponent::Kind::pulse);
  EXPECT_EQ(p.dof, 2);
  EXPECT_DOUBLE_EQ(p.amplitude, 100.0);
  EXPECT_DOUBLE_EQ(p.start, 5.0);
  EXPECT_DOUBLE_EQ(p.duration, 0.01);
  EXPECT_EQ(c.unknown_input_dofs, std::vector<int>{2});
}

TEST(Presets, DuffingMatchesReferenceSetup) {
  const ExperimentConfig c = preset("duffing2dof");
  const StructuralMatrices s = c.truth().matrices();
  Matrix K(2, 2), E(2, 2);
  K << 7.5, -4.5, -4.5, 4.5;
  E << 15, -27, 0, 27;
  EXPECT_EQ(s.stiffness, K);
  EXPECT_EQ(s.cubic, E);
  EXPECT_EQ(c.filter.q_diag, Vector::Constant(10, 1e-9));
  EXPECT_EQ(c.filter.r_diag, Vector::Constant(6, 1e-5));
  ASSERT_EQ(c.excitation.components.size(), 2u);
  EXPECT_EQ(c.excitation.components[0].dof, 1);
  EXPECT_EQ(c.excitation.components[1].kind, ExcitationComponent::Kind::white_noise);
  EXPECT_DOUBLE_EQ(c.excitation.components[1].variance, 4.0);
  EXPECT_EQ(preset("duffing-accel-only").filter.r_diag.size(), 2);
  EXPECT_EQ(preset("duffing-no-disp").layout, ObservationLayout::no_displacement());
  EXPECT_EQ(preset("duffing-no-vel").layout, ObservationLayout::no_velocity());
}

TEST(Presets, InitialGuessesAreHalfTruth) {
  for (const auto& name : preset_names()) {
    const ExperimentConfig c = preset(name);
    EXPECT_EQ(c.init.parameters, 0.5 * c.build_model().nominal_parameters()) << name;
    EXPECT_TRUE(c.init.states.isZero(0.0));
    EXPECT_NO_THROW(c.validate());
  }
}

TEST(Export, TraceHeaderForLinearRun) {
  const auto h = trace_header(preset("linear3dof-pulse"));
  const std::vector<std::string> head(h.begin(), h.begin() + 15);
  EXPECT_EQ(head, (std::vector<std::string>{"t", "x1", "x2", "x3", "v1", "v2", "v3", "c1", "c2",
                                            "c3", "k1", "k2", "k3", "u3_stage1", "u3_stage2"}));
}

TEST(Export, ReExportIsByteIdentical) {
  const ExperimentConfig c = config_from_json(kMinimal);
  const ExperimentReport rep = run_experiment(c, 3);
  const fs::path a = scratch_dir("export_a"), b = scratch_dir("export_b");
  export_report(rep, a);
  export_report(rep, b);
  for (const char* f : {"trace.csv", "truth.csv", "metrics.json", "config.echo"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  const ExperimentReport again = run_experiment(c, 3);
  const fs::path d = scratch_dir("export_c");
  export_report(again, d);
  EXPECT_EQ(read_file(a / "trace.csv"), read_file(d / "trace.csv"));
  EXPECT_EQ(read_file(a / "metrics.json"), read_file(d / "metrics.json"));
}

TEST(Export, EchoReproducesRun) {
  const ExperimentConfig c = config_from_json(kMinimal);
  const ExperimentReport rep = run_experiment(c, 2);
  const fs::path dir = scratch_dir("echo");
  export_report(rep, dir);
  const ExperimentConfig echoed = load_config(dir / "config.echo");
  ASSERT_EQ(echoed.seeds, std::vector<std::uint64_t>{2});
  const ExperimentReport again = run_experiment(echoed, echoed.seeds.front());
  EXPECT_EQ(trace_csv(rep), trace_csv(again));
  EXPECT_NE(metrics_json(rep).find("\"config\""), std::string::npos);
}

TEST(Export, UnwritablePathThrows) {
  const ExperimentReport rep = run_experiment(config_from_json(kMinimal), 1);
  const fs::path file = scratch_dir("blocker");
  std::ofstream(file) << "x";
  EXPECT_ANY_THROW(export_report(rep, file / "sub"));
}

TEST(Experiment, StatusAndExitCodes) {
  EXPECT_EQ(exit_code(RunStatus::converged), 0);
  EXPECT_EQ(exit_code(RunStatus::not_converged), 2);
  EXPECT_EQ(exit_code(RunStatus::diverged), 3);
  EXPECT_EQ(kConfigErrorExit, 64);

  ExperimentConfig c = config_from_json(kMinimal);
  c.filter.divergence_guard = 1e-3;
  const ExperimentReport rep = run_experiment(c, 1);
  EXPECT_EQ(rep.status, RunStatus::diverged);
  EXPECT_TRUE(rep.run.diverged);
}

TEST(Experiment, StandardModeUsesKnownInputs) {
  ExperimentConfig c = config_from_json(kMinimal);
  c.filter.mode = FilterSettings::Mode::standard;
  const ExperimentReport rep = run_experiment(c, 1);
  ASSERT_FALSE(rep.run.diverged);
  for (size_t k = 0; k < rep.run.steps.size(); ++k) {
    ASSERT_EQ(rep.run.steps[k].input_estimate.values, rep.truth.inputs[k + 1]);
  }
}

TEST(Sweep, NeedsTwoSeeds) {
  const ExperimentConfig c = config_from_json(kMinimal);
  EXPECT_THROW(sweep(c, {1}), ConfigError);
}

TEST(Sweep, AggregatesAndMatchesSingleRuns) {
  const ExperimentConfig c = config_from_json(kMinimal);
  const SweepReport s = sweep(c, {1, 2, 3}, 2);
  ASSERT_EQ(s.outcomes.size(), 3u);
  for (const auto& o : s.outcomes) {
    const ExperimentReport r = run_experiment(c, o.seed);
    ASSERT_TRUE(o.status.has_value());
    EXPECT_EQ(*o.status, r.status);
    EXPECT_EQ(o.final_parameters, r.metrics.final_parameters);
  }
  EXPECT_GE(s.convergence_rate, 0.0);
  EXPECT_LE(s.convergence_rate, 1.0);
  EXPECT_EQ(s.final_dispersion.size(), 4);
  EXPECT_NE(sweep_json(s).find("convergence_rate"), std::string::npos);
}
