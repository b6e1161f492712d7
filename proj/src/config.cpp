#include "mhlti/config.hpp"

#include "mhlti/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace mhlti {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  fail(ErrorKind::ConfigInvalid, field + ": " + why);
}

void check_keys(const json& section, const std::string& name, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : section.items()) {
    if (!key.empty() && key.front() == '_') continue;
    if (!allowed.contains(key)) invalid(name + "." + key, "unknown key");
  }
}

const json& section(const json& root, const std::string& name) {
  if (!root.contains(name)) invalid(name, "missing section");
  const json& s = root.at(name);
  if (!s.is_object()) invalid(name, "must be an object");
  return s;
}

const json& need(const json& obj, const std::string& sec, const std::string& key) {
  if (!obj.contains(key)) invalid(sec + "." + key, "missing");
  return obj.at(key);
}

double read_number(const json& j, const std::string& field) {
  if (!j.is_number()) invalid(field, "expected a number");
  return j.get<double>();
}

int read_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) invalid(field, "expected an integer");
  return j.get<int>();
}

Vector read_vector(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) invalid(field, "expected a number or a list of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = read_number(j[i], field + "[" + std::to_string(i) + "]");
  }
  return v;
}

Matrix read_matrix(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) invalid(field, "expected a number or a non-empty row-major list");
  if (!j.front().is_array()) return read_vector(j, field).transpose();
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string row_field = field + "[" + std::to_string(r) + "]";
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      invalid(row_field, "rows must be lists of equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = read_number(row[static_cast<std::size_t>(c)], row_field + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

LtiSystem read_system(const json& root) {
  const json& s = section(root, "system");
  check_keys(s, "system", {"A", "B", "C", "mu_w", "sigma_w", "sigma_e", "mu_0", "sigma_0"});
  auto mat = [&](const char* key) { return read_matrix(need(s, "system", key), std::string("system.") + key); };
  auto vec = [&](const char* key) { return read_vector(need(s, "system", key), std::string("system.") + key); };
  try {
    return LtiSystem(mat("A"), mat("B"), mat("C"), vec("mu_w"), mat("sigma_w"), mat("sigma_e"), vec("mu_0"),
                     mat("sigma_0"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    invalid("system", e.what());
  }
}

UtilityFunction read_utility(const json& root) {
  if (!root.contains("utility")) return UtilityFunction::sqrt();
  const json& u = section(root, "utility");
  check_keys(u, "utility", {"family", "rho"});
  const json& fam = need(u, "utility", "family");
  if (!fam.is_string()) invalid("utility.family", "expected a string");
  const auto family = fam.get<std::string>();
  try {
    if (family == "sqrt") return UtilityFunction::sqrt();
    if (family == "power") return UtilityFunction::power(read_number(need(u, "utility", "rho"), "utility.rho"));
    if (family == "exponential") {
      return UtilityFunction::exponential(read_number(need(u, "utility", "rho"), "utility.rho"));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid) throw;
    invalid("utility.rho", e.what());
  }
  invalid("utility.family", "expected sqrt, power or exponential, got '" + family + "'");
}

}  // namespace

DesignConfig parse_config(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigParse, origin + ":" + position(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) fail(ErrorKind::ConfigParse, origin + ": top level must be an object");
  check_keys(root, "<root>", {"system", "controllers", "agent", "principal", "utility", "search"});

  LtiSystem sys = read_system(root);

  const json& c = section(root, "controllers");
  check_keys(c, "controllers", {"K_low", "K_high"});
  FeedbackController low{read_matrix(need(c, "controllers", "K_low"), "controllers.K_low"), Effort::Low};
  FeedbackController high{read_matrix(need(c, "controllers", "K_high"), "controllers.K_high"), Effort::High};

  const json& a = section(root, "agent");
  check_keys(a, "agent", {"gamma_a", "cost_gap", "R", "r"});
  AgentCostSpec agent;
  agent.gamma_a = read_number(need(a, "agent", "gamma_a"), "agent.gamma_a");
  if (a.contains("cost_gap")) agent.cost_gap_override = read_number(a.at("cost_gap"), "agent.cost_gap");
  if (a.contains("R")) {
    agent.R = read_matrix(a.at("R"), "agent.R");
    agent.r = a.contains("r") ? read_vector(a.at("r"), "agent.r") : Vector::Zero(agent.R.rows());
  } else if (a.contains("r")) {
    invalid("agent.r", "given without R");
  } else if (!agent.cost_gap_override) {
    invalid("agent", "needs cost_gap or R");
  }

  const json& p = section(root, "principal");
  check_keys(p, "principal", {"gamma_p", "J0P", "J1P", "Q", "q"});
  PrincipalCostSpec principal;
  principal.gamma_p = read_number(need(p, "principal", "gamma_p"), "principal.gamma_p");
  if (p.contains("J0P") != p.contains("J1P")) invalid("principal.J0P", "J0P and J1P must be given together");
  if (p.contains("J0P")) {
    principal.state_cost_override =
        std::pair{read_number(p.at("J0P"), "principal.J0P"), read_number(p.at("J1P"), "principal.J1P")};
  }
  if (p.contains("Q")) {
    principal.Q = read_matrix(p.at("Q"), "principal.Q");
    principal.q_vec = p.contains("q") ? read_vector(p.at("q"), "principal.q") : Vector::Zero(principal.Q.rows());
  } else if (p.contains("q")) {
    invalid("principal.q", "given without Q");
  }

  const UtilityFunction utility = read_utility(root);

  const json& s = section(root, "search");
  check_keys(s, "search", {"T_max", "eta_grid_size", "liability_mode", "tol_sep", "tol_cdf"});
  DesignConfig cfg{std::move(sys), std::move(low), std::move(high), std::move(agent), std::move(principal),
                   utility,       1, 512, LiabilityMode::Limited, Tolerances{}};
  cfg.T_max = read_int(need(s, "search", "T_max"), "search.T_max");
  if (s.contains("eta_grid_size")) cfg.eta_grid_size = read_int(s.at("eta_grid_size"), "search.eta_grid_size");
  if (s.contains("liability_mode")) {
    const json& m = s.at("liability_mode");
    const std::string mode = m.is_string() ? m.get<std::string>() : "";
    if (mode == "limited") {
      cfg.liability = LiabilityMode::Limited;
    } else if (mode == "general") {
      cfg.liability = LiabilityMode::General;
    } else {
      invalid("search.liability_mode", "expected \"limited\" or \"general\"");
    }
  }
  if (s.contains("tol_sep")) cfg.tol.sep = read_number(s.at("tol_sep"), "search.tol_sep");
  if (s.contains("tol_cdf")) cfg.tol.cdf = read_number(s.at("tol_cdf"), "search.tol_cdf");
  cfg.validate();
  return cfg;
}

DesignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string write_config(const DesignConfig& c) {
  json root;
  const auto& sys = c.system;
  root["system"] = {{"A", matrix_json(sys.A())},           {"B", matrix_json(sys.B())},
                    {"C", matrix_json(sys.C())},           {"mu_w", vector_json(sys.mu_w())},
                    {"sigma_w", matrix_json(sys.Sigma_w())}, {"sigma_e", matrix_json(sys.Sigma_e())},
                    {"mu_0", vector_json(sys.mu_0())},     {"sigma_0", matrix_json(sys.Sigma_0())}};
  root["controllers"] = {{"K_low", matrix_json(c.low.K)}, {"K_high", matrix_json(c.high.K)}};

  json agent = {{"gamma_a", c.agent.gamma_a}};
  if (c.agent.cost_gap_override) agent["cost_gap"] = *c.agent.cost_gap_override;
  if (c.agent.R.size() > 0) {
    agent["R"] = matrix_json(c.agent.R);
    agent["r"] = vector_json(c.agent.r);
  }
  root["agent"] = agent;

  json principal = {{"gamma_p", c.principal.gamma_p}};
  if (c.principal.state_cost_override) {
    principal["J0P"] = c.principal.state_cost_override->first;
    principal["J1P"] = c.principal.state_cost_override->second;
  }
  if (c.principal.Q.size() > 0) {
    principal["Q"] = matrix_json(c.principal.Q);
    principal["q"] = vector_json(c.principal.q_vec);
  }
  root["principal"] = principal;

  json utility = {{"family", to_string(c.utility.family())}};
  if (c.utility.family() != UtilityFunction::Family::Sqrt) utility["rho"] = c.utility.rho();
  root["utility"] = utility;

  root["search"] = {{"T_max", c.T_max},
                    {"eta_grid_size", c.eta_grid_size},
                    {"liability_mode", to_string(c.liability)},
                    {"tol_sep", c.tol.sep},
                    {"tol_cdf", c.tol.cdf}};
  return root.dump(2) + "\n";
}

bool same_config(const DesignConfig& a, const DesignConfig& b) {
  auto eq = [](const auto& x, const auto& y) {
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.size() == 0 || x == y);
  };
  const auto& s = a.system;
  const auto& t = b.system;
  return eq(s.A(), t.A()) && eq(s.B(), t.B()) && eq(s.C(), t.C()) && eq(s.mu_w(), t.mu_w()) &&
         eq(s.Sigma_w(), t.Sigma_w()) && eq(s.Sigma_e(), t.Sigma_e()) && eq(s.mu_0(), t.mu_0()) &&
         eq(s.Sigma_0(), t.Sigma_0()) && eq(a.low.K, b.low.K) && eq(a.high.K, b.high.K) &&
         a.low.effort == b.low.effort && a.high.effort == b.high.effort &&
         eq(a.agent.R, b.agent.R) && eq(a.agent.r, b.agent.r) && a.agent.gamma_a == b.agent.gamma_a &&
         a.agent.cost_gap_override == b.agent.cost_gap_override && eq(a.principal.Q, b.principal.Q) &&
         eq(a.principal.q_vec, b.principal.q_vec) && a.principal.gamma_p == b.principal.gamma_p &&
         a.principal.state_cost_override == b.principal.state_cost_override && a.utility == b.utility &&
         a.T_max == b.T_max && a.eta_grid_size == b.eta_grid_size && a.liability == b.liability &&
         a.tol.sep == b.tol.sep && a.tol.cdf == b.tol.cdf;
}

}  // namespace mhlti
