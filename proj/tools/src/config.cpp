#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "mirror/experiments.hpp"

namespace mirror {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(what + ": not a number: '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    // allow 1e6-style integers
    const double d = to_double(t, what);
    if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d))) {
      throw ConfigError(what + ": not a non-negative integer: '" + text + "'");
    }
    return static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& origin) {
  Config cfg;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in, path);
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) throw ConfigError("missing setting '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(it->second, key);
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : static_cast<std::size_t>(to_u64(it->second, key));
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : to_u64(it->second, key);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string v = lower(it->second);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + it->second + "'");
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw ConfigError("linspace needs at least one point");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const std::string t = trim(text);
  if (t.rfind("linspace(", 0) == 0) {
    if (t.back() != ')') throw ConfigError("bad grid '" + text + "'");
    const auto args = split(t.substr(9, t.size() - 10), ',');
    if (args.size() != 3) throw ConfigError("linspace takes (lo, hi, n): '" + text + "'");
    return linspace(to_double(args[0], "linspace"), to_double(args[1], "linspace"),
                    static_cast<std::size_t>(to_u64(args[2], "linspace")));
  }
  std::vector<double> out;
  for (const auto& item : split(t, ',')) {
    if (!item.empty()) out.push_back(to_double(item, "grid"));
  }
  if (out.empty()) throw ConfigError("empty grid '" + text + "'");
  return out;
}

std::vector<double> Config::get_grid(const std::string& key,
                                     const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return parse_grid(it->second);
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (auto& item : split(it->second, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list for '" + key + "'");
  return out;
}

KernelSpec parse_kernel_spec(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.empty() || parts[0].empty()) throw ConfigError("empty kernel entry");
  KernelSpec spec;
  try {
    spec.kind = parse_kernel_kind(parts[0]);
  } catch (const Error& e) {
    throw ConfigError("unknown kernel '" + parts[0] + "'");
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string p = lower(parts[i]);
    if (p == "tune") {
      spec.tune = true;
    } else if (p == "identity") {
      spec.precondition = false;
    } else if (p.rfind("l=", 0) == 0) {
      spec.leapfrog_steps = static_cast<int>(to_u64(p.substr(2), "leapfrog steps"));
    } else {
      spec.epsilon = to_double(p, "kernel '" + text + "' epsilon");
    }
  }
  if (spec.tune && spec.epsilon) throw ConfigError("kernel '" + text + "': both tune and epsilon");
  return spec;
}

std::string KernelSpec::label() const {
  std::string s = to_string(kind);
  if (!precondition) s += "(identity)";
  if (leapfrog_steps != 1) s += "(L=" + std::to_string(leapfrog_steps) + ")";
  return s;
}

ExperimentConfig ExperimentConfig::from(const Config& params) {
  ExperimentConfig cfg;
  cfg.params = params;
  cfg.experiment = params.require_string("experiment");
  cfg.seed = params.get_u64("seed", 1);
  cfg.replicates = params.get_size("replicates", 1);
  cfg.threads = params.get_size("threads", 1);
  cfg.out_dir = params.get_string("out", "out");
  cfg.timing = params.get_bool("timing", true);
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  return cfg;
}

}  // namespace mirror
