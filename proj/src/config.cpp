#include "voxdiff/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "csv_util.hpp"

namespace voxdiff {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    if (x < 0 && std::is_unsigned_v<Int>) throw std::out_of_range("negative");
    return static_cast<Int>(x);
  } catch (const std::exception&) {
    throw Error(Errc::BadConfig, key + ": not an integer: '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw Error(Errc::BadConfig, key + ": not a number: '" + v + "'");
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::BadConfig, what);
}

}  // namespace

void RunConfig::validate() const {
  require(grid_size >= 16 && grid_size <= 64, "grid_size must be in [16, 64]");
  require(steps >= 1 && steps <= 10000, "steps must be in [1, 10000]");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0, "need 0 < beta_start <= beta_end < 1");
  require(hidden >= 1 && hidden <= 256, "hidden must be in [1, 256]");
  require(epochs >= 1, "epochs must be >= 1");
  require(lr > 0.0 && lr < 1.0, "lr must be in (0, 1)");
  require(batch == 1, "only batch = 1 is supported");
  require(k >= 1 && k <= 1000, "k must be in [1, 1000]");
  require(!clamp || clamp->first < clamp->second, "clamp needs lo < hi");
  require(n_estimators >= 1 && n_estimators <= 100000, "n_estimators must be in [1, 100000]");
  require(max_depth >= 1 && max_depth <= 64, "max_depth must be in [1, 64]");
  require(n_folds >= 2 && n_folds <= 100, "n_folds must be in [2, 100]");
  require(k_aug >= 0 && k_aug <= 1000, "k_aug must be in [0, 1000]");
}

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::string minority;
  for (const auto& c : minority_classes) minority += (minority.empty() ? "" : ",") + c;
  return {
      {"seed", std::to_string(seed)},
      {"grid_size", std::to_string(grid_size)},
      {"steps", std::to_string(steps)},
      {"beta_start", csv::num(beta_start)},
      {"beta_end", csv::num(beta_end)},
      {"variance_mode", variance_mode == VarianceMode::Posterior ? "posterior" : "beta"},
      {"hidden", std::to_string(hidden)},
      {"epochs", std::to_string(epochs)},
      {"lr", csv::num(lr)},
      {"batch", std::to_string(batch)},
      {"max_steps", std::to_string(max_steps)},
      {"k", std::to_string(k)},
      {"clamp", clamp ? csv::num(clamp->first) + ":" + csv::num(clamp->second) : "none"},
      {"n_estimators", std::to_string(n_estimators)},
      {"max_depth", std::to_string(max_depth)},
      {"n_folds", std::to_string(n_folds)},
      {"k_aug", std::to_string(k_aug)},
      {"minority_classes", minority},
  };
}

NoiseSchedule RunConfig::schedule() const { return linear_schedule(steps, beta_start, beta_end, variance_mode); }

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"seed", [&](auto& k, auto& v) { c.seed = parse_integer<std::uint64_t>(k, v); }},
      {"grid_size", [&](auto& k, auto& v) { c.grid_size = parse_integer<int>(k, v); }},
      {"steps", [&](auto& k, auto& v) { c.steps = parse_integer<int>(k, v); }},
      {"beta_start", [&](auto& k, auto& v) { c.beta_start = parse_real(k, v); }},
      {"beta_end", [&](auto& k, auto& v) { c.beta_end = parse_real(k, v); }},
      {"variance_mode",
       [&](auto& k, auto& v) {
         if (v == "posterior") c.variance_mode = VarianceMode::Posterior;
         else if (v == "beta") c.variance_mode = VarianceMode::Beta;
         else throw Error(Errc::BadConfig, k + ": expected posterior or beta");
       }},
      {"hidden", [&](auto& k, auto& v) { c.hidden = parse_integer<int>(k, v); }},
      {"epochs", [&](auto& k, auto& v) { c.epochs = parse_integer<int>(k, v); }},
      {"lr", [&](auto& k, auto& v) { c.lr = parse_real(k, v); }},
      {"batch", [&](auto& k, auto& v) { c.batch = parse_integer<int>(k, v); }},
      {"max_steps", [&](auto& k, auto& v) { c.max_steps = parse_integer<std::uint64_t>(k, v); }},
      {"k", [&](auto& k, auto& v) { c.k = parse_integer<int>(k, v); }},
      {"clamp",
       [&](auto& k, auto& v) {
         if (v == "none") {
           c.clamp.reset();
           return;
         }
         const auto colon = v.find(':');
         if (colon == std::string::npos) throw Error(Errc::BadConfig, k + ": expected none or lo:hi");
         c.clamp = std::make_pair(parse_real(k, v.substr(0, colon)), parse_real(k, v.substr(colon + 1)));
       }},
      {"n_estimators", [&](auto& k, auto& v) { c.n_estimators = parse_integer<int>(k, v); }},
      {"max_depth", [&](auto& k, auto& v) { c.max_depth = parse_integer<int>(k, v); }},
      {"n_folds", [&](auto& k, auto& v) { c.n_folds = parse_integer<int>(k, v); }},
      {"k_aug", [&](auto& k, auto& v) { c.k_aug = parse_integer<int>(k, v); }},
      {"minority_classes",
       [&](auto&, auto& v) {
         c.minority_classes.clear();
         for (const auto& name : csv::split(v)) {
           if (!trim(name).empty()) c.minority_classes.insert(trim(name));
         }
       }},
  };

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(Errc::BadConfig, "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) throw Error(Errc::BadConfig, "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(Errc::BadConfig, "repeated key '" + key + "'");
    it->second(key, value);
  }
  c.validate();
  return c;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  for (const auto& [k, v] : config.entries()) out << k << '=' << v << '\n';
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

}  // namespace voxdiff
