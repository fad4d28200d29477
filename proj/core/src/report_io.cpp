#include "ipsukf/errors.hpp"
#include "ipsukf/experiment.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace ipsukf {

namespace {

using json = nlohmann::json;
using ordered = nlohmann::ordered_json;

// JSON cursor that remembers where it is for error messages.
class Field {
 public:
  Field(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return node_; }

  bool has(const char* key) const { return node_.is_object() && node_.contains(key); }

  Field at(const char* key) const {
    if (!node_.is_object()) fail("expected an object");
    if (!node_.contains(key)) throw ConfigError(fmt::format("{}.{}: missing", path_, key));
    return {node_.at(key), fmt::format("{}.{}", path_, key)};
  }

  std::vector<Field> items() const {
    if (!node_.is_array()) fail("expected an array");
    std::vector<Field> out;
    for (size_t i = 0; i < node_.size(); ++i) out.emplace_back(node_[i], fmt::format("{}[{}]", path_, i));
    return out;
  }

  double number() const {
    if (!node_.is_number()) fail("expected a number");
    return node_.get<double>();
  }
  bool boolean() const {
    if (!node_.is_boolean()) fail("expected true or false");
    return node_.get<bool>();
  }
  std::string string() const {
    if (!node_.is_string()) fail("expected a string");
    return node_.get<std::string>();
  }
  std::int64_t integer() const {
    if (!node_.is_number_integer()) fail("expected an integer");
    return node_.get<std::int64_t>();
  }
  std::uint64_t unsigned_integer() const {
    if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<std::int64_t>() >= 0)) {
      fail("expected a non-negative integer");
    }
    return node_.get<std::uint64_t>();
  }
  Vector vector() const {
    const auto list = items();
    Vector v(static_cast<Eigen::Index>(list.size()));
    for (size_t i = 0; i < list.size(); ++i) v(static_cast<Eigen::Index>(i)) = list[i].number();
    return v;
  }
  /// A number is broadcast to `n` entries; an array is taken as is.
  Vector vector_or_scalar(Eigen::Index n) const {
    if (node_.is_number()) return Vector::Constant(n, number());
    return vector();
  }
  std::vector<bool> flags() const {
    std::vector<bool> out;
    for (const auto& f : items()) out.push_back(f.boolean());
    return out;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("{}: {}", path_, what));
  }

 private:
  const json& node_;
  std::string path_;
};

double number_or(const Field& f, const char* key, double fallback) {
  return f.has(key) ? f.at(key).number() : fallback;
}

int dof_index(const Field& f, int n) {
  const auto d = f.integer();
  if (d < 1 || d > n) f.fail(fmt::format("DOF {} outside 1..{}", d, n));
  return static_cast<int>(d - 1);
}

ModelConfig parse_model(const Field& f) {
  ModelConfig m;
  const std::string type = f.at("type").string();
  if (type == "linear_chain") {
    m.kind = ModelConfig::Kind::linear_chain;
  } else if (type == "duffing_chain") {
    m.kind = ModelConfig::Kind::duffing_chain;
  } else {
    f.at("type").fail("expected \"linear_chain\" or \"duffing_chain\"");
  }
  m.masses = f.at("masses").vector();
  m.dampings = f.at("dampings").vector();
  m.stiffnesses = f.at("stiffnesses").vector();
  if (m.kind == ModelConfig::Kind::duffing_chain) m.cubic = f.at("cubic").vector();
  if (f.has("estimate")) {
    const Field e = f.at("estimate");
    if (e.has("damping")) m.estimate_damping = e.at("damping").flags();
    if (e.has("stiffness")) m.estimate_stiffness = e.at("stiffness").flags();
    if (e.has("cubic")) m.estimate_cubic = e.at("cubic").flags();
  }
  return m;
}

ExcitationComponent parse_component(const Field& f, int n) {
  const std::string kind = f.at("kind").string();
  if (kind == "zero") return {};
  if (kind == "pulse") {
    return ExcitationComponent::pulse(dof_index(f.at("dof"), n), f.at("amplitude").number(),
                                      f.at("start").number(), f.at("duration").number());
  }
  if (kind == "white_noise") {
    return ExcitationComponent::white_noise(dof_index(f.at("dof"), n), number_or(f, "mean", 0.0),
                                            f.at("variance").number(),
                                            f.has("seed") ? f.at("seed").unsigned_integer() : 0);
  }
  f.at("kind").fail("expected \"pulse\", \"white_noise\" or \"zero\"");
}

ordered vector_json(const Vector& v) {
  ordered out = ordered::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

ordered flags_json(const std::vector<bool>& f) {
  ordered out = ordered::array();
  for (bool b : f) out.push_back(b);
  return out;
}

ordered number_or_null(double x) { return std::isfinite(x) ? ordered(x) : ordered(nullptr); }

ordered config_json(const ExperimentConfig& c) {
  ordered model;
  model["type"] =
      c.model.kind == ModelConfig::Kind::linear_chain ? "linear_chain" : "duffing_chain";
  model["masses"] = vector_json(c.model.masses);
  model["dampings"] = vector_json(c.model.dampings);
  model["stiffnesses"] = vector_json(c.model.stiffnesses);
  if (c.model.kind == ModelConfig::Kind::duffing_chain) model["cubic"] = vector_json(c.model.cubic);
  ordered estimate = ordered::object();
  if (!c.model.estimate_damping.empty()) estimate["damping"] = flags_json(c.model.estimate_damping);
  if (!c.model.estimate_stiffness.empty()) {
    estimate["stiffness"] = flags_json(c.model.estimate_stiffness);
  }
  if (!c.model.estimate_cubic.empty()) estimate["cubic"] = flags_json(c.model.estimate_cubic);
  if (!estimate.empty()) model["estimate"] = estimate;

  ordered excitation = ordered::array();
  for (const auto& e : c.excitation.components) {
    ordered item;
    switch (e.kind) {
      case ExcitationComponent::Kind::zero: item["kind"] = "zero"; break;
      case ExcitationComponent::Kind::pulse:
        item["kind"] = "pulse";
        item["dof"] = e.dof + 1;
        item["amplitude"] = e.amplitude;
        item["start"] = e.start;
        item["duration"] = e.duration;
        break;
      case ExcitationComponent::Kind::white_noise:
        item["kind"] = "white_noise";
        item["dof"] = e.dof + 1;
        item["mean"] = e.mean;
        item["variance"] = e.variance;
        item["seed"] = e.seed;
        break;
    }
    excitation.push_back(item);
  }

  ordered unknown = ordered::array();
  for (int d : c.unknown_input_dofs) unknown.push_back(d + 1);

  ordered filter;
  filter["mode"] = c.filter.mode == FilterSettings::Mode::ips ? "ips" : "standard";
  filter["alpha"] = c.filter.alpha;
  filter["beta"] = c.filter.beta;
  filter["kappa"] = c.filter.kappa;
  filter["q_diag"] = vector_json(c.filter.q_diag);
  filter["r_diag"] = vector_json(c.filter.r_diag);
  filter["dt"] = c.filter.dt;
  filter["duration"] = c.filter.duration;
  filter["divergence_guard"] = c.filter.divergence_guard;

  ordered init;
  init["states"] = vector_json(c.init.states);
  init["parameters"] = vector_json(c.init.parameters);
  init["p0_states"] = vector_json(c.init.p0_states);
  init["p0_parameters"] = vector_json(c.init.p0_parameters);
  init["input"] = vector_json(c.init.input);

  ordered out;
  out["name"] = c.name;
  out["model"] = model;
  out["excitation"] = excitation;
  out["unknown_input_dofs"] = unknown;
  out["layout"] = {{"displacements", c.layout.include_displacements},
                   {"velocities", c.layout.include_velocities},
                   {"accelerations", c.layout.include_accelerations}};
  out["noise"] = {{"rms_ratio", c.noise_rms_ratio}};
  out["filter"] = filter;
  out["init"] = init;
  out["metrics"] = {{"window", c.metrics.window},
                    {"mean_rel_error", c.metrics.mean_rel_error},
                    {"std_rel_error", c.metrics.std_rel_error}};
  out["seeds"] = c.seeds;
  out["output_dir"] = c.output_dir;
  return out;
}

std::string fmt_num(double x) { return fmt::format("{}", x); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << content;
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

}  // namespace

ExperimentConfig config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config: invalid JSON ({})", e.what()));
  }
  const Field root(doc, "config");

  ExperimentConfig c;
  c.name = root.has("name") ? root.at("name").string() : "experiment";
  c.model = parse_model(root.at("model"));
  const int n = c.model.n_dof();
  if (n < 1) root.at("model").at("masses").fail("at least one DOF required");

  if (root.has("excitation")) {
    for (const auto& item : root.at("excitation").items()) {
      c.excitation.components.push_back(parse_component(item, n));
    }
  }
  if (root.has("unknown_input_dofs")) {
    for (const auto& item : root.at("unknown_input_dofs").items()) {
      c.unknown_input_dofs.push_back(dof_index(item, n));
    }
  }
  if (root.has("layout")) {
    const Field l = root.at("layout");
    c.layout.include_displacements = l.has("displacements") ? l.at("displacements").boolean() : true;
    c.layout.include_velocities = l.has("velocities") ? l.at("velocities").boolean() : true;
    c.layout.include_accelerations = l.has("accelerations") ? l.at("accelerations").boolean() : true;
  }
  if (root.has("noise")) c.noise_rms_ratio = number_or(root.at("noise"), "rms_ratio", 0.05);

  for (const auto& item : root.at("model").at("masses").items()) {
    if (!(item.number() > 0.0)) item.fail("mass must be positive");
  }
  if (!c.layout.include_accelerations) {
    root.at("layout").at("accelerations").fail("must be true (input recovery needs accelerations)");
  }

  // the parameter count depends on the estimate flags
  const ChainModel model = [&] {
    try {
      return c.build_model();
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config.model: {}", e.what()));
    }
  }();
  const int L = model.state_dim();
  const int m = c.layout.dimension(n);

  const Field filter = root.at("filter");
  if (filter.has("mode")) {
    const std::string mode = filter.at("mode").string();
    if (mode == "ips") {
      c.filter.mode = FilterSettings::Mode::ips;
    } else if (mode == "standard") {
      c.filter.mode = FilterSettings::Mode::standard;
    } else {
      filter.at("mode").fail("expected \"ips\" or \"standard\"");
    }
  }
  c.filter.alpha = number_or(filter, "alpha", c.filter.alpha);
  c.filter.beta = number_or(filter, "beta", c.filter.beta);
  c.filter.kappa = number_or(filter, "kappa", c.filter.kappa);
  c.filter.q_diag = filter.at("q_diag").vector_or_scalar(L);
  c.filter.r_diag = filter.at("r_diag").vector_or_scalar(m);
  c.filter.dt = filter.at("dt").number();
  c.filter.duration = filter.at("duration").number();
  c.filter.divergence_guard = number_or(filter, "divergence_guard", c.filter.divergence_guard);

  c.init.states = Vector::Zero(2 * n);
  c.init.parameters = 0.5 * model.nominal_parameters();
  c.init.p0_states = Vector::Constant(2 * n, 1e-2);
  c.init.p0_parameters = Vector::Constant(model.n_params(), 1.0);
  c.init.input = Vector::Zero(n);
  if (root.has("init")) {
    const Field init = root.at("init");
    if (init.has("states")) c.init.states = init.at("states").vector_or_scalar(2 * n);
    if (init.has("parameters")) c.init.parameters = init.at("parameters").vector();
    if (init.has("parameter_fraction")) {
      c.init.parameters = init.at("parameter_fraction").number() * model.nominal_parameters();
    }
    if (init.has("p0_states")) c.init.p0_states = init.at("p0_states").vector_or_scalar(2 * n);
    if (init.has("p0_parameters")) {
      c.init.p0_parameters = init.at("p0_parameters").vector_or_scalar(model.n_params());
    }
    if (init.has("input")) c.init.input = init.at("input").vector_or_scalar(n);
  }
  if (root.has("metrics")) {
    const Field mt = root.at("metrics");
    c.metrics.window = number_or(mt, "window", c.metrics.window);
    c.metrics.mean_rel_error = number_or(mt, "mean_rel_error", c.metrics.mean_rel_error);
    c.metrics.std_rel_error = number_or(mt, "std_rel_error", c.metrics.std_rel_error);
  }
  if (root.has("seeds")) {
    c.seeds.clear();
    for (const auto& s : root.at("seeds").items()) c.seeds.push_back(s.unsigned_integer());
  }
  if (root.has("output_dir")) c.output_dir = root.at("output_dir").string();

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", file.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::string config_to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2) + "\n";
}

std::vector<std::string> trace_header(const ExperimentConfig& config) {
  const ChainModel model = config.build_model();
  const int n = model.n_dof();
  std::vector<std::string> state_names;
  for (int i = 0; i < n; ++i) state_names.push_back(fmt::format("x{}", i + 1));
  for (int i = 0; i < n; ++i) state_names.push_back(fmt::format("v{}", i + 1));
  for (const auto& s : model.parameter_slots()) state_names.push_back(s.name());

  std::vector<std::string> cols{"t"};
  cols.insert(cols.end(), state_names.begin(), state_names.end());
  for (int d : config.unknown_input_dofs) {
    cols.push_back(fmt::format("u{}_stage1", d + 1));
    cols.push_back(fmt::format("u{}_stage2", d + 1));
  }
  for (const auto& s : state_names) cols.push_back("var_" + s);
  return cols;
}

std::string trace_csv(const ExperimentReport& report) {
  std::string out;
  const auto header = trace_header(report.config);
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& step : report.run.steps) {
    out += fmt_num(step.time);
    for (Eigen::Index i = 0; i < step.state.size(); ++i) out += ',' + fmt_num(step.state(i));
    for (int d : report.config.unknown_input_dofs) {
      out += ',' + fmt_num(step.stage1_input.values(d));
      out += ',' + fmt_num(step.input_estimate.values(d));
    }
    for (Eigen::Index i = 0; i < step.covariance.rows(); ++i) {
      out += ',' + fmt_num(step.covariance(i, i));
    }
    out += '\n';
  }
  return out;
}

std::string truth_csv(const ExperimentReport& report) {
  const int n = report.truth.n_dof();
  std::string out = "t";
  for (int i = 0; i < n; ++i) out += fmt::format(",x{}", i + 1);
  for (int i = 0; i < n; ++i) out += fmt::format(",v{}", i + 1);
  for (int i = 0; i < n; ++i) out += fmt::format(",a{}", i + 1);
  for (int i = 0; i < n; ++i) out += fmt::format(",u{}", i + 1);
  out += '\n';
  for (long k = 0; k < report.truth.size(); ++k) {
    out += fmt_num(report.truth.times[size_t(k)]);
    for (Eigen::Index i = 0; i < 2 * n; ++i) out += ',' + fmt_num(report.truth.states[size_t(k)](i));
    for (int i = 0; i < n; ++i) out += ',' + fmt_num(report.truth.accelerations[size_t(k)](i));
    for (int i = 0; i < n; ++i) out += ',' + fmt_num(report.truth.inputs[size_t(k)](i));
    out += '\n';
  }
  return out;
}

std::string metrics_json(const ExperimentReport& report) {
  const Metrics& m = report.metrics;
  ordered params = ordered::array();
  for (size_t j = 0; j < m.parameter_names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    params.push_back({{"name", m.parameter_names[j]},
                      {"true", m.true_parameters(i)},
                      {"final", number_or_null(m.final_parameters(i))},
                      {"mean_rel_error", number_or_null(m.parameter_mean_rel_error(i))},
                      {"std_rel_error", number_or_null(m.parameter_std_rel_error(i))},
                      {"convergence_time", number_or_null(m.convergence_time(i))}});
  }
  ordered inputs = ordered::object();
  for (size_t q = 0; q < m.unknown_input_dofs.size(); ++q) {
    inputs[fmt::format("u{}", m.unknown_input_dofs[q] + 1)] =
        number_or_null(m.input_rmse(static_cast<Eigen::Index>(q)));
  }
  ordered states = ordered::object();
  const int n = static_cast<int>(m.state_rmse.size() / 2);
  for (int i = 0; i < 2 * n; ++i) {
    states[fmt::format("{}{}", i < n ? 'x' : 'v', i % n + 1)] = number_or_null(m.state_rmse(i));
  }

  ordered out;
  out["name"] = report.config.name;
  out["seed"] = report.seed;
  out["status"] = std::string(to_string(report.status));
  out["converged"] = m.converged;
  out["diverged"] = report.run.diverged;
  out["failed_step"] = report.run.failed_step;
  out["failure"] = report.run.failure;
  out["steps_completed"] = m.steps_completed;
  out["window"] = m.window;
  out["parameters"] = params;
  out["input_rmse"] = inputs;
  out["state_rmse"] = states;
  out["config"] = config_json(report.config);
  return out.dump(2) + "\n";
}

std::string sweep_json(const SweepReport& report) {
  ordered seeds = ordered::array();
  for (const auto& o : report.outcomes) {
    ordered item;
    item["seed"] = o.seed;
    item["status"] = o.status ? std::string(to_string(*o.status)) : std::string("error");
    if (!o.error.empty()) item["error"] = o.error;
    ordered finals = ordered::object();
    for (size_t j = 0; j < report.parameter_names.size() && o.status; ++j) {
      finals[report.parameter_names[j]] =
          number_or_null(o.final_parameters(static_cast<Eigen::Index>(j)));
    }
    item["final_parameters"] = finals;
    seeds.push_back(item);
  }
  ordered params = ordered::array();
  for (size_t j = 0; j < report.parameter_names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    params.push_back({{"name", report.parameter_names[j]},
                      {"true", report.true_parameters(i)},
                      {"median_mean_rel_error", number_or_null(report.median_mean_rel_error(i))},
                      {"final_dispersion", number_or_null(report.final_dispersion(i))}});
  }
  ordered out;
  out["name"] = report.name;
  out["seeds"] = seeds;
  out["convergence_rate"] = report.convergence_rate;
  out["divergence_rate"] = report.divergence_rate;
  out["parameters"] = params;
  return out.dump(2) + "\n";
}

void export_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  ExperimentConfig echo = report.config;
  echo.seeds = {report.seed};
  write_file(dir / "trace.csv", trace_csv(report));
  write_file(dir / "truth.csv", truth_csv(report));
  write_file(dir / "metrics.json", metrics_json(report));
  write_file(dir / "config.echo", config_to_json(echo));
}

void export_sweep(const SweepReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  write_file(dir / "sweep.json", sweep_json(report));
}

}  // namespace ipsukf
