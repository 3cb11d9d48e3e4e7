#include "bae/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bae {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out.set(key, std::move(value));
  }
  return out;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigFile::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "alpha",      "alpha_warmup", "batch_size", "block_size", "checkpoint", "d_in",        "d_lat",
      "d_mix",      "data",         "data_seed",  "holdout_frac", "k",        "kind",        "log_every",
      "lr",         "metrics",      "n_features", "n_samples",  "noise",      "ns_iters",    "seed",
      "sparsity",   "steps",        "subspace",   "variant",    "warmup_frac"};
  return keys;
}

TrainConfig to_train_config(const ConfigFile& file) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : file.values()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  const auto get = [&](const char* key) -> const std::string* {
    const auto it = file.values().find(key);
    return it == file.values().end() ? nullptr : &it->second;
  };

  TrainConfig c;
  if (auto v = get("variant")) {
    try {
      c.variant = parse_variant(*v);
    } catch (const std::exception& e) {
      throw ConfigError("key 'variant': " + std::string(e.what()));
    }
  }
  if (auto v = get("lr")) c.optim.lr = as_double("lr", *v);
  if (auto v = get("steps")) c.optim.steps = as_uint("steps", *v);
  if (auto v = get("warmup_frac")) c.optim.warmup_frac = as_double("warmup_frac", *v);
  if (auto v = get("alpha_warmup")) c.optim.alpha_warmup_steps = as_uint("alpha_warmup", *v);
  if (auto v = get("ns_iters")) c.optim.ns_iters = static_cast<int>(as_uint("ns_iters", *v));
  if (auto v = get("alpha")) c.alpha = as_double("alpha", *v);
  if (auto v = get("seed")) c.seed = as_uint("seed", *v);
  if (auto v = get("batch_size")) c.batch_size = as_uint("batch_size", *v);
  if (auto v = get("log_every")) c.log_every = as_uint("log_every", *v);
  if (auto v = get("block_size")) c.block_size = as_uint("block_size", *v);
  if (auto v = get("holdout_frac")) c.holdout_frac = as_double("holdout_frac", *v);
  if (auto v = get("k")) c.topk = as_uint("k", *v);
  if (auto v = get("checkpoint")) c.checkpoint = *v;
  if (auto v = get("d_lat")) c.dims.d_lat = as_uint("d_lat", *v);
  if (auto v = get("d_mix")) c.dims.d_mix = as_uint("d_mix", *v);

  const std::string* data = get("data");
  const std::string* kind = get("kind");
  if (data && kind) throw ConfigError("keys 'data' and 'kind' are mutually exclusive");
  if (auto v = get("d_in")) {
    c.dims.d_in = as_uint("d_in", *v);
  } else if (data) {
    c.dims.d_in = read_dump_header(*data).d_in;
  }
  if (data) c.data.dump = *data;
  if (kind) {
    SyntheticSpec s;
    try {
      s.kind = parse_synthetic_kind(*kind);
    } catch (const std::exception& e) {
      throw ConfigError("key 'kind': " + std::string(e.what()));
    }
    s.d_in = c.dims.d_in;
    if (auto v = get("data_seed")) s.seed = as_uint("data_seed", *v);
    if (auto v = get("noise")) s.noise = as_double("noise", *v);
    if (auto v = get("sparsity")) s.sparsity = as_double("sparsity", *v);
    if (auto v = get("n_features")) s.n_features = as_uint("n_features", *v);
    if (auto v = get("subspace")) {
      for (double idx : parse_number_list(*v)) {
        if (idx < 0 || idx != static_cast<double>(static_cast<std::size_t>(idx))) {
          throw ConfigError("key 'subspace' expects non-negative integers");
        }
        s.subspace.push_back(static_cast<std::size_t>(idx));
      }
    }
    c.data.synthetic = s;
    if (auto v = get("n_samples")) c.data.n_samples = as_uint("n_samples", *v);
  }
  return c;
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const std::string item = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (item.empty()) throw ConfigError("empty entry in list '" + std::string(text) + "'");
    out.push_back(as_double("list", item));
  }
  return out;
}

}  // namespace bae
