#include "causalsoil/kvconfig.hpp"

#include <fstream>
#include <sstream>

#include "causalsoil/error.hpp"

namespace causalsoil {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string_view where) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(where),
                        "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    auto key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) {
      throw ConfigError(std::string(where), "line " + std::to_string(line_no) + ": empty key");
    }
    kv.entries_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) { return parse(read_file(path), path); }

std::optional<std::string> KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config", "key '" + key + "' expects a number, got '" + *v + "'");
  }
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config", "key '" + key + "' expects an integer, got '" + *v + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config", "key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::string KeyValues::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("io", "cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace causalsoil
