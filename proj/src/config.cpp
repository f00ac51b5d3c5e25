#include "lvsa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lvsa/error.hpp"

namespace lvsa {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + std::string(key) + "': invalid value '" + std::string(v) +
                      "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + std::string(key) + "': invalid number '" + std::string(v) +
                      "'");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true/false");
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"d", [](RunConfig& c, auto k, auto v) { c.d = parse_number<std::size_t>(k, v); }},
      {"seed", [](RunConfig& c, auto k, auto v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"lr", [](RunConfig& c, auto k, auto v) { c.lr = parse_double(k, v); }},
      {"batch_size",
       [](RunConfig& c, auto k, auto v) { c.batch_size = parse_number<std::size_t>(k, v); }},
      {"alpha", [](RunConfig& c, auto k, auto v) { c.alpha = parse_double(k, v); }},
      {"beta", [](RunConfig& c, auto k, auto v) { c.beta = parse_double(k, v); }},
      {"epochs", [](RunConfig& c, auto k, auto v) { c.epochs = parse_number<std::size_t>(k, v); }},
      {"float_width",
       [](RunConfig& c, auto k, auto v) { c.float_width = parse_number<int>(k, v); }},
      {"leaky_slope", [](RunConfig& c, auto k, auto v) { c.leaky_slope = parse_double(k, v); }},
      {"l2", [](RunConfig& c, auto k, auto v) { c.l2 = parse_double(k, v); }},
      {"init_scale", [](RunConfig& c, auto k, auto v) { c.init_scale = parse_double(k, v); }},
      {"layers_i",
       [](RunConfig& c, auto k, auto v) { c.layers_i = parse_number<std::size_t>(k, v); }},
      {"layers_d",
       [](RunConfig& c, auto k, auto v) { c.layers_d = parse_number<std::size_t>(k, v); }},
      {"layers_n",
       [](RunConfig& c, auto k, auto v) { c.layers_n = parse_number<std::size_t>(k, v); }},
      {"patience",
       [](RunConfig& c, auto k, auto v) { c.patience = parse_number<std::size_t>(k, v); }},
      {"eval_every",
       [](RunConfig& c, auto k, auto v) { c.eval_every = parse_number<std::size_t>(k, v); }},
      {"threads", [](RunConfig& c, auto k, auto v) { c.threads = parse_number<std::size_t>(k, v); }},
      {"relation_prediction",
       [](RunConfig& c, auto k, auto v) { c.relation_prediction = parse_bool(k, v); }},
  };
  return table;
}

}  // namespace

void validate_config(const RunConfig& c) {
  if (c.d == 0) throw ConfigError("d must be positive");
  if (c.lr <= 0.0) throw ConfigError("lr must be positive");
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.alpha < 0.0 || c.beta < 0.0) throw ConfigError("alpha and beta must be >= 0");
  if (c.float_width != 32 && c.float_width != 64) throw ConfigError("float_width must be 32 or 64");
  if (c.leaky_slope < 0.0) throw ConfigError("leaky_slope must be >= 0");
  if (c.l2 < 0.0) throw ConfigError("l2 must be >= 0");
  if (c.init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
  if (c.layers_i == 0 || c.layers_d == 0 || c.layers_n == 0) {
    throw ConfigError("layer counts must be positive");
  }
  if (c.eval_every == 0) throw ConfigError("eval_every must be positive");
  if (c.threads == 0) throw ConfigError("threads must be positive");
  if (c.relation_prediction) {
    throw ConfigError("relation_prediction is reserved and not implemented");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second(c, key, value);
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "d = " << c.d << "\nseed = " << c.seed << "\nlr = " << c.lr
      << "\nbatch_size = " << c.batch_size << "\nalpha = " << c.alpha << "\nbeta = " << c.beta
      << "\nepochs = " << c.epochs << "\nfloat_width = " << c.float_width
      << "\nleaky_slope = " << c.leaky_slope << "\nl2 = " << c.l2
      << "\ninit_scale = " << c.init_scale << "\nlayers_i = " << c.layers_i
      << "\nlayers_d = " << c.layers_d << "\nlayers_n = " << c.layers_n
      << "\npatience = " << c.patience << "\neval_every = " << c.eval_every
      << "\nthreads = " << c.threads
      << "\nrelation_prediction = " << (c.relation_prediction ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace lvsa
