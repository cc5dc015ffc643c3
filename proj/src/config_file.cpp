#include "vcache/config_file.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace vcache {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"policy", {"kind", "delta", "threshold"}},
      {"cache",
       {"delta", "min_observations", "epsilon_grid", "gamma_max", "l2_regularization",
        "similarity_metric", "rng_seed", "insert_on_correct"}},
      {"index", {"engine", "m", "ef_construction", "ef_search", "seed"}},
      {"judging",
       {"mode", "async", "template", "endpoint", "model", "auth_env", "timeout_ms", "retries"}},
      {"backends",
       {"chat_endpoint", "chat_model", "chat_auth_env", "embedding_endpoint", "embedding_model",
        "embedding_auth_env", "timeout_ms", "retries", "backoff_ms"}},
      {"service",
       {"listen", "snapshot_path", "snapshot_interval_s", "admin_enabled", "admin_token_env",
        "cache_key"}},
  };
  return keys;
}

template <typename T>
T get(const pt::ptree& tree, const std::string& path, T fallback) {
  auto raw = tree.get_child_optional(path);
  if (!raw) return fallback;
  // The defaulted ptree getter swallows conversion failures; insist on a clean parse.
  auto value = raw->get_value_optional<T>();
  if (!value) throw ConfigError("invalid value for " + path + ": " + raw->data());
  return *value;
}

bool get_bool(const pt::ptree& tree, const std::string& path, bool fallback) {
  auto raw = tree.get_optional<std::string>(path);
  if (!raw) return fallback;
  std::string v = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(*raw));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for " + path + ": " + *raw);
}

std::vector<double> parse_grid(const std::string& text) {
  std::string trimmed = boost::algorithm::trim_copy(text);
  if (trimmed == "default") return default_epsilon_grid();
  std::vector<std::string> parts;
  boost::algorithm::split(parts, trimmed, boost::is_any_of(","));
  std::vector<double> grid;
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (p.empty()) continue;
    try {
      grid.push_back(std::stod(p));
    } catch (const std::exception&) {
      throw ConfigError("invalid epsilon_grid value: " + p);
    }
  }
  return grid;
}

void apply_http(const pt::ptree& tree, const std::string& section, const std::string& prefix,
                HttpBackendOptions& out) {
  out.endpoint = get<std::string>(tree, section + "." + prefix + "endpoint", out.endpoint);
  out.model = get<std::string>(tree, section + "." + prefix + "model", out.model);
  out.auth_env_var = get<std::string>(tree, section + "." + prefix + "auth_env", out.auth_env_var);
}

}  // namespace

ServiceConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  for (const auto& [section, body] : tree) {
    auto known = known_keys().find(section);
    if (known == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!known->second.contains(key)) {
        throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      }
    }
  }

  ServiceConfig out;
  CacheConfig& cache = out.cache_config;
  cache.delta = get(tree, "cache.delta", cache.delta);
  cache.min_observations = get<std::size_t>(tree, "cache.min_observations", cache.min_observations);
  if (auto grid = tree.get_optional<std::string>("cache.epsilon_grid")) {
    cache.epsilon_grid = parse_grid(*grid);
  }
  cache.gamma_max = get(tree, "cache.gamma_max", cache.gamma_max);
  cache.l2_regularization = get(tree, "cache.l2_regularization", cache.l2_regularization);
  cache.similarity_metric = get<std::string>(tree, "cache.similarity_metric", cache.similarity_metric);
  if (auto seed = tree.get_optional<std::string>("cache.rng_seed")) {
    try {
      cache.rng_seed = std::stoull(*seed);
    } catch (const std::exception&) {
      throw ConfigError("invalid rng_seed: " + *seed);
    }
  }
  cache.insert_on_correct = get_bool(tree, "cache.insert_on_correct", cache.insert_on_correct);

  const std::string engine = get<std::string>(tree, "index.engine", "exact");
  if (engine == "exact") {
    cache.index_engine = IndexEngine::Exact;
  } else if (engine == "hnsw") {
    cache.index_engine = IndexEngine::Hnsw;
  } else {
    throw ConfigError("index.engine must be exact or hnsw");
  }
  cache.hnsw.m = get<std::size_t>(tree, "index.m", cache.hnsw.m);
  cache.hnsw.ef_construction = get<std::size_t>(tree, "index.ef_construction", cache.hnsw.ef_construction);
  cache.hnsw.ef_search = get<std::size_t>(tree, "index.ef_search", cache.hnsw.ef_search);
  cache.hnsw.seed = get<std::uint64_t>(tree, "index.seed", cache.hnsw.seed);

  const std::string mode = get<std::string>(tree, "judging.mode", "exact");
  if (mode == "exact") {
    cache.label_mode = LabelMode::ExactMatch;
  } else if (mode == "judge") {
    cache.label_mode = LabelMode::Judge;
  } else {
    throw ConfigError("judging.mode must be exact or judge");
  }
  cache.async_labeling = get_bool(tree, "judging.async", cache.async_labeling);
  out.judge_template_path = get<std::string>(tree, "judging.template", "");

  const auto timeout = std::chrono::milliseconds(get<long>(tree, "backends.timeout_ms", 30000));
  const int retries = get(tree, "backends.retries", 3);
  const auto backoff = std::chrono::milliseconds(get<long>(tree, "backends.backoff_ms", 200));
  for (HttpBackendOptions* o : {&out.upstream_chat, &out.upstream_embedding}) {
    o->timeout = timeout;
    o->retries = retries;
    o->initial_backoff = backoff;
  }
  apply_http(tree, "backends", "chat_", out.upstream_chat);
  apply_http(tree, "backends", "embedding_", out.upstream_embedding);
  if (tree.get_optional<std::string>("judging.endpoint")) {
    HttpBackendOptions judge = out.upstream_chat;
    apply_http(tree, "judging", "", judge);
    judge.timeout = std::chrono::milliseconds(get<long>(tree, "judging.timeout_ms", timeout.count()));
    judge.retries = get(tree, "judging.retries", retries);
    out.judge = judge;
  }

  const std::string kind = get<std::string>(tree, "policy.kind", "vcache");
  const double parameter = kind == "gs" ? get(tree, "policy.threshold", 0.9)
                                        : get(tree, "policy.delta", cache.delta);
  out.policy = make_policy(kind, parameter);

  const std::string listen = get<std::string>(tree, "service.listen", "127.0.0.1:8080");
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw ConfigError("service.listen must be host:port");
  out.listen_host = listen.substr(0, colon);
  try {
    out.listen_port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("service.listen has an invalid port: " + listen);
  }
  if (auto p = tree.get_optional<std::string>("service.snapshot_path")) out.snapshot_path = *p;
  if (tree.get_child_optional("service.snapshot_interval_s")) {
    out.snapshot_interval = std::chrono::seconds(get<long>(tree, "service.snapshot_interval_s", 0));
  }
  out.admin_enabled = get_bool(tree, "service.admin_enabled", false);
  out.admin_token_env = get<std::string>(tree, "service.admin_token_env", "");
  const std::string key = get<std::string>(tree, "service.cache_key", "last_user");
  if (key == "last_user") {
    out.key_mode = CacheKeyMode::LastUserMessage;
  } else if (key == "conversation") {
    out.key_mode = CacheKeyMode::FullConversation;
  } else {
    throw ConfigError("service.cache_key must be last_user or conversation");
  }

  validate_config(out.cache_config);
  validate_service_config(out);
  return out;
}

ServiceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_service_config(const ServiceConfig& config) {
  if (config.snapshot_interval && !config.snapshot_path) {
    throw ConfigError("snapshot_interval requires snapshot_path");
  }
  if (config.snapshot_interval && config.snapshot_interval->count() <= 0) {
    throw ConfigError("snapshot_interval must be positive");
  }
  if (config.listen_port < 0 || config.listen_port > 65535) {
    throw ConfigError("listen port out of range");
  }
}

}  // namespace vcache
