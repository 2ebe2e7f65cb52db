#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "obtuse/errors.hpp"
#include "obtuse/family.hpp"
#include "obtuse/io.hpp"
#include "obtuse/tensor3.hpp"

namespace obtuse {

// Scenario description parsed from a flat key-value file. Lines are
// `key value...`, `#` starts a comment. Keys:
//
//   name NAME
//   dim N
//   probs p_1 .. p_{n+1}                    constant probabilities
//   probs_affine a_1 b_1 .. a_{n+1} b_{n+1} alpha_i(h) = a_i + b_i h
//   planar p q r                            2-d three-point chain
//   planar_affine ap bp aq bq ar br         p(h) = ap + bp h, ...
//   h_schedule h_1 .. h_m                   positive, strictly decreasing
//   t T                                     horizon
//   alpha a_1 .. a_n                        repeatable; builds the CF grid
//   paths N
//   seed S
//   grid_step DT                            limit-path sampling grid
//   max_final_error E                       convergence exit threshold
//   tensor c_111 c_112 ..                   n^3 entries, k fastest (diagonalize)
//   out DIR
//
// Exactly one probability spec may appear; `tensor` configs may omit it.
struct ScenarioConfig {
  std::string name = "scenario";
  int dim = 0;
  std::optional<ObtuseFamilyd> family;
  std::optional<Tensor3d> tensor;
  std::vector<double> h_schedule;
  double t = 1.0;
  std::vector<Eigen::VectorXd> alpha_grid;
  std::int64_t paths = 100000;
  std::uint64_t seed = 1;
  double grid_step = 0.01;
  double max_final_error = 1e-2;
  std::string out;
};

namespace detail {

inline double parse_real(const std::string& tok, const std::string& where, int line) {
  double v = 0;
  const auto* begin = tok.data();
  const auto* end = tok.data() + tok.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    std::ostringstream msg;
    msg << where << ":" << line << ": field expects a real number, got '" << tok << "'";
    throw ConfigError(msg.str());
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& tok, const std::string& where, int line) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    std::ostringstream msg;
    msg << where << ":" << line << ": field expects an unsigned integer, got '" << tok << "'";
    throw ConfigError(msg.str());
  }
  return v;
}

}  // namespace detail

inline ScenarioConfig parse_config(std::istream& in, const std::string& source = "config") {
  ScenarioConfig cfg;
  std::string line;
  int lineno = 0;
  int prob_specs = 0;
  std::string prob_field;
  std::vector<double> probs, probs_affine, planar, planar_affine, tensor_entries;

  auto fail = [&](const std::string& what) -> void {
    std::ostringstream msg;
    msg << source << ":" << lineno << ": " << what;
    throw ConfigError(msg.str());
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> toks;
    for (std::string tok; ls >> tok;) toks.push_back(tok);
    auto reals = [&] {
      std::vector<double> vs;
      vs.reserve(toks.size());
      for (const auto& tok : toks) vs.push_back(detail::parse_real(tok, source, lineno));
      return vs;
    };

    if (key == "name") {
      if (toks.size() != 1) fail("field 'name' expects one token");
      cfg.name = toks[0];
    } else if (key == "dim") {
      if (toks.size() != 1) fail("field 'dim' expects one integer");
      cfg.dim = static_cast<int>(detail::parse_u64(toks[0], source, lineno));
    } else if (key == "probs") {
      probs = reals();
      prob_field = key;
      ++prob_specs;
    } else if (key == "probs_affine") {
      probs_affine = reals();
      prob_field = key;
      ++prob_specs;
    } else if (key == "planar") {
      planar = reals();
      prob_field = key;
      ++prob_specs;
    } else if (key == "planar_affine") {
      planar_affine = reals();
      prob_field = key;
      ++prob_specs;
    } else if (key == "h_schedule") {
      cfg.h_schedule = reals();
    } else if (key == "t") {
      if (toks.size() != 1) fail("field 't' expects one real");
      cfg.t = detail::parse_real(toks[0], source, lineno);
    } else if (key == "alpha") {
      const auto vs = reals();
      cfg.alpha_grid.push_back(Eigen::Map<const Eigen::VectorXd>(vs.data(), vs.size()));
    } else if (key == "paths") {
      if (toks.size() != 1) fail("field 'paths' expects one integer");
      cfg.paths = static_cast<std::int64_t>(detail::parse_u64(toks[0], source, lineno));
    } else if (key == "seed") {
      if (toks.size() != 1) fail("field 'seed' expects one integer");
      cfg.seed = detail::parse_u64(toks[0], source, lineno);
    } else if (key == "grid_step") {
      if (toks.size() != 1) fail("field 'grid_step' expects one real");
      cfg.grid_step = detail::parse_real(toks[0], source, lineno);
    } else if (key == "max_final_error") {
      if (toks.size() != 1) fail("field 'max_final_error' expects one real");
      cfg.max_final_error = detail::parse_real(toks[0], source, lineno);
    } else if (key == "tensor") {
      tensor_entries = reals();
    } else if (key == "out") {
      if (toks.size() != 1) fail("field 'out' expects one token");
      cfg.out = toks[0];
    } else {
      fail("unknown field '" + key + "'");
    }
  }
  lineno = 0;  // post-parse validation reports without a line number

  auto post_fail = [&](const std::string& what) -> void {
    throw ConfigError(source + ": " + what);
  };

  if (prob_specs > 1) post_fail("more than one probability spec given");
  if (!planar.empty() || !planar_affine.empty()) {
    if (cfg.dim == 0) cfg.dim = 2;
    if (cfg.dim != 2) post_fail("field 'planar': planar chains are 2-dimensional");
  }
  if (cfg.dim <= 0 && (!probs.empty() || !probs_affine.empty())) {
    if (!probs.empty()) cfg.dim = static_cast<int>(probs.size()) - 1;
    if (!probs_affine.empty()) cfg.dim = static_cast<int>(probs_affine.size()) / 2 - 1;
  }

  if (!probs.empty()) {
    if (static_cast<int>(probs.size()) != cfg.dim + 1)
      post_fail("field 'probs': expected dim+1 entries");
    cfg.family = ObtuseFamilyd::constant_probs(
        Eigen::Map<const Eigen::VectorXd>(probs.data(), probs.size()));
  } else if (!probs_affine.empty()) {
    if (static_cast<int>(probs_affine.size()) != 2 * (cfg.dim + 1))
      post_fail("field 'probs_affine': expected 2(dim+1) entries (base, slope pairs)");
    Eigen::VectorXd base(cfg.dim + 1), slope(cfg.dim + 1);
    for (int i = 0; i <= cfg.dim; ++i) {
      base(i) = probs_affine[2 * static_cast<std::size_t>(i)];
      slope(i) = probs_affine[2 * static_cast<std::size_t>(i) + 1];
    }
    cfg.family = ObtuseFamilyd::affine_probs(base, slope);
  } else if (!planar.empty()) {
    if (planar.size() != 3) post_fail("field 'planar': expected three weights p q r");
    cfg.family = ObtuseFamilyd::planar(planar[0], planar[1], planar[2]);
  } else if (!planar_affine.empty()) {
    if (planar_affine.size() != 6)
      post_fail("field 'planar_affine': expected three base/slope pairs");
    Eigen::VectorXd base(3), slope(3);
    for (int i = 0; i < 3; ++i) {
      base(i) = planar_affine[2 * static_cast<std::size_t>(i)];
      slope(i) = planar_affine[2 * static_cast<std::size_t>(i) + 1];
    }
    cfg.family = ObtuseFamilyd::planar_affine(base, slope);
  }

  if (!tensor_entries.empty()) {
    if (cfg.dim <= 0) post_fail("field 'tensor' requires 'dim'");
    const auto n = static_cast<std::size_t>(cfg.dim);
    if (tensor_entries.size() != n * n * n)
      post_fail("field 'tensor': expected dim^3 entries");
    Tensor3d t(cfg.dim);
    std::size_t idx = 0;
    for (int i = 0; i < cfg.dim; ++i)
      for (int j = 0; j < cfg.dim; ++j)
        for (int k = 0; k < cfg.dim; ++k) t(i, j, k) = tensor_entries[idx++];
    cfg.tensor = std::move(t);
  }

  if (cfg.dim <= 0) post_fail("field 'dim' missing (and not derivable from a probability spec)");
  for (std::size_t i = 0; i + 1 < cfg.h_schedule.size(); ++i)
    if (!(cfg.h_schedule[i] > cfg.h_schedule[i + 1]))
      post_fail("field 'h_schedule': entries must be strictly decreasing");
  for (const double h : cfg.h_schedule)
    if (!(h > 0)) post_fail("field 'h_schedule': entries must be positive");
  if (!(cfg.t >= 0)) post_fail("field 't': horizon must be >= 0");
  if (cfg.paths < 1) post_fail("field 'paths': need at least one path");
  if (!(cfg.grid_step > 0)) post_fail("field 'grid_step': must be positive");
  for (const auto& a : cfg.alpha_grid)
    if (a.size() != cfg.dim) post_fail("field 'alpha': expected dim components");

  // Surface distribution errors (bad probabilities) as config errors naming
  // the offending field. h-dependent families are probed at the finest
  // schedule step; with no schedule only constant families can be probed.
  if (cfg.family && (!cfg.family->depends_on_h() || !cfg.h_schedule.empty())) {
    try {
      (void)cfg.family->at(cfg.h_schedule.empty() ? 0.0 : cfg.h_schedule.back());
    } catch (const Error& e) {
      post_fail("field '" + prob_field + "': " + e.what());
    }
  }
  return cfg;
}

// The three built-in 2-d scenarios. example-1 has constant weights
// (1/2, 1/3, 1/6); example-2 sends the second weight to zero linearly in h;
// example-3 concentrates all but 2h of the mass on the first value.
inline std::optional<ScenarioConfig> builtin_scenario(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.dim = 2;
  cfg.h_schedule = {1e-1, 1e-2, 1e-3, 1e-4};
  cfg.t = 1.0;
  cfg.paths = 100000;
  cfg.seed = 7;
  cfg.grid_step = 0.01;
  Eigen::VectorXd base(3), slope(3);
  auto alpha = [](double a1, double a2) {
    Eigen::VectorXd v(2);
    v << a1, a2;
    return v;
  };
  if (name == "example-1") {
    cfg.family = ObtuseFamilyd::planar(0.5, 1.0 / 3.0, 1.0 / 6.0);
    cfg.alpha_grid = {alpha(1, 0), alpha(0, 1), alpha(1, 1)};
    return cfg;
  }
  if (name == "example-2") {
    base << 0.5, 0.0, 0.5;
    slope << 0.0, 1.0, -1.0;
    cfg.family = ObtuseFamilyd::planar_affine(base, slope);
    cfg.alpha_grid = {alpha(0, 1), alpha(0, -1), alpha(1, 1)};
    return cfg;
  }
  if (name == "example-3") {
    base << 1.0, 0.0, 0.0;
    slope << -2.0, 1.0, 1.0;
    cfg.family = ObtuseFamilyd::planar_affine(base, slope);
    cfg.alpha_grid = {alpha(1, 0), alpha(0, 1), alpha(1, 1)};
    return cfg;
  }
  return std::nullopt;
}

// Resolves a --config value: a built-in scenario name, else a file path.
inline ScenarioConfig load_scenario(const std::string& spec) {
  if (auto builtin = builtin_scenario(spec)) return *builtin;
  std::ifstream in(spec);
  if (!in) throw ConfigError("cannot open config file '" + spec + "'");
  return parse_config(in, spec);
}

// Canonical serialization; its hash is stamped into every emitted CSV.
inline std::string canonical_text(const ScenarioConfig& cfg) {
  std::ostringstream os;
  os << "name " << cfg.name << "\ndim " << cfg.dim << "\n";
  if (cfg.family) {
    os << (cfg.family->is_planar() ? "planar_affine" : "probs_affine");
    for (Eigen::Index i = 0; i < cfg.family->base().size(); ++i)
      os << " " << fmt_g(cfg.family->base()(i)) << " " << fmt_g(cfg.family->slope()(i));
    os << "\n";
  }
  if (cfg.tensor) {
    os << "tensor";
    for (Eigen::Index i = 0; i < cfg.tensor->data().size(); ++i)
      os << " " << fmt_g(cfg.tensor->data()(i));
    os << "\n";
  }
  os << "h_schedule";
  for (const double h : cfg.h_schedule) os << " " << fmt_g(h);
  os << "\nt " << fmt_g(cfg.t) << "\n";
  for (const auto& a : cfg.alpha_grid) {
    os << "alpha";
    for (Eigen::Index i = 0; i < a.size(); ++i) os << " " << fmt_g(a(i));
    os << "\n";
  }
  os << "paths " << cfg.paths << "\nseed " << cfg.seed << "\ngrid_step "
     << fmt_g(cfg.grid_step) << "\nmax_final_error " << fmt_g(cfg.max_final_error) << "\n";
  return os.str();
}

inline std::uint64_t config_fingerprint(const ScenarioConfig& cfg) {
  return fnv1a64(canonical_text(cfg));
}

}  // namespace obtuse
