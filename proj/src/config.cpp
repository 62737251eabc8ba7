#include "adaptcm/config.hpp"

#include <toml.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace adaptcm {

struct Config::Impl {
  toml::table root;
};

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

ConfigError parse_failure(const toml::parse_error& e, const std::string& origin) {
  std::ostringstream os;
  os << origin << ':' << e.source().begin.line << ": " << e.description();
  return ConfigError(os.str());
}

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts;
}

const toml::node* find(const toml::table& root, const std::string& key) {
  const toml::node* node = &root;
  for (const auto& part : split_key(key)) {
    const auto* t = node->as_table();
    if (!t) return nullptr;
    node = t->get(part);
    if (!node) return nullptr;
  }
  return node;
}

double as_number(const toml::node& n, const std::string& key) {
  if (const auto* i = n.as_integer()) return static_cast<double>(i->get());
  if (const auto* f = n.as_floating_point()) return f->get();
  throw ConfigError("config key '" + key + "' must be a number");
}

const toml::array& as_array(const toml::node& n, const std::string& key) {
  const auto* a = n.as_array();
  if (!a) throw ConfigError("config key '" + key + "' must be an array");
  return *a;
}

void collect(const toml::table& t, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : t) {
    const std::string name = prefix.empty() ? std::string(k.str()) : prefix + "." + std::string(k.str());
    if (const auto* sub = v.as_table()) {
      collect(*sub, name, out);
    } else {
      out.push_back(name);
    }
  }
}

}  // namespace

MissingKeys::MissingKeys(std::vector<std::string> keys)
    : ConfigError([&] {
        std::string msg = "missing config keys:";
        for (const auto& k : keys) msg += " " + k;
        return msg;
      }()),
      keys_(std::move(keys)) {}

Config::Config() : impl_(std::make_unique<Impl>()) {}
Config::~Config() = default;
Config::Config(const Config& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
Config::Config(Config&&) noexcept = default;
Config& Config::operator=(const Config& other) {
  if (this != &other) impl_ = std::make_unique<Impl>(*other.impl_);
  return *this;
}
Config& Config::operator=(Config&&) noexcept = default;

Config Config::parse(const std::string& text, const std::string& origin) {
  Config cfg;
  try {
    cfg.impl_->root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    throw parse_failure(e, origin);
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool Config::has(const std::string& key) const { return find(impl_->root, key) != nullptr; }

void Config::set(const std::string& key, const std::string& value) {
  toml::table parsed;
  try {
    parsed = toml::parse("value = " + trim(value));
  } catch (const toml::parse_error& e) {
    throw ConfigError("config key '" + key + "': invalid value '" + trim(value) + "': " +
                      std::string(e.description()));
  }
  const auto parts = split_key(key);
  toml::table* t = &impl_->root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    auto* next = t->get(parts[i]);
    if (!next) next = &t->insert_or_assign(parts[i], toml::table{}).first->second;
    t = next->as_table();
    if (!t) throw ConfigError("config key '" + key + "': '" + parts[i] + "' is not a section");
  }
  t->insert_or_assign(parts.back(), std::move(*parsed.get("value")));
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("override must look like section.key=value: '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void Config::require(const std::vector<std::string>& keys) const {
  std::vector<std::string> missing;
  for (const auto& k : keys)
    if (!has(k)) missing.push_back(k);
  if (!missing.empty()) throw MissingKeys(std::move(missing));
}

namespace {

const toml::node& lookup(const toml::table& root, const std::string& key) {
  const toml::node* n = find(root, key);
  if (!n) throw MissingKeys({key});
  return *n;
}

}  // namespace

double Config::number(const std::string& key) const { return as_number(lookup(impl_->root, key), key); }

long Config::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v)) throw ConfigError("config key '" + key + "' must be an integer");
  return static_cast<long>(v);
}

bool Config::boolean(const std::string& key) const {
  const auto* b = lookup(impl_->root, key).as_boolean();
  if (!b) throw ConfigError("config key '" + key + "' must be true or false");
  return b->get();
}

std::string Config::string(const std::string& key) const {
  const auto* s = lookup(impl_->root, key).as_string();
  if (!s) throw ConfigError("config key '" + key + "' must be a string");
  return s->get();
}

std::vector<double> Config::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& e : as_array(lookup(impl_->root, key), key)) out.push_back(as_number(e, key));
  return out;
}

std::vector<int> Config::integers(const std::string& key) const {
  std::vector<int> out;
  for (double v : numbers(key)) {
    if (v != std::floor(v)) throw ConfigError("config key '" + key + "' must hold integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::vector<double>> Config::table(const std::string& key) const {
  std::vector<std::vector<double>> out;
  for (const auto& row : as_array(lookup(impl_->root, key), key)) {
    std::vector<double> r;
    for (const auto& e : as_array(row, key)) r.push_back(as_number(e, key));
    out.push_back(std::move(r));
  }
  return out;
}

double Config::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}
long Config::integer_or(const std::string& key, long fallback) const {
  return has(key) ? integer(key) : fallback;
}
bool Config::boolean_or(const std::string& key, bool fallback) const {
  return has(key) ? boolean(key) : fallback;
}
std::string Config::string_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  collect(impl_->root, "", out);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace adaptcm
