#include "shapestab/json_io.hpp"

#include <cmath>
#include <cstdio>

namespace shapestab {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ParseError("field '" + field + "': " + what);
}

const char* type_name(const json& j) { return j.type_name(); }

}  // namespace

Rational rational_from_json(const json& j, const std::string& field) {
  if (j.is_number_integer()) return Rational(j.get<long long>());
  if (!j.is_string()) {
    field_error(field, std::string("expected an exact rational string \"p/q\", got ") + type_name(j) +
                           (j.is_number_float() ? " (floating-point rates are rejected)" : ""));
  }
  try {
    return Rational::parse(j.get<std::string>());
  } catch (const std::exception& e) {
    field_error(field, e.what());
  }
}

StorageNetwork network_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) field_error(where.empty() ? "<root>" : where, "expected an object");
  StorageNetwork net;
  const auto need = [&](const char* key) -> const json& {
    if (!j.contains(key)) field_error(where + key, "missing");
    return j.at(key);
  };

  const json& n = need("n");
  if (!n.is_number_integer()) field_error(where + "n", std::string("expected integer, got ") + type_name(n));
  net.n = n.get<int>();

  const json& hoods = need("neighborhoods");
  if (!hoods.is_array()) field_error(where + "neighborhoods", "expected array of arrays");
  for (std::size_t i = 0; i < hoods.size(); ++i) {
    const std::string f = where + "neighborhoods[" + std::to_string(i) + "]";
    if (!hoods[i].is_array()) field_error(f, "expected array of node indices");
    std::vector<int> s;
    for (std::size_t k = 0; k < hoods[i].size(); ++k) {
      if (!hoods[i][k].is_number_integer()) {
        field_error(f + "[" + std::to_string(k) + "]", "expected integer node index");
      }
      s.push_back(hoods[i][k].get<int>());
    }
    net.neighborhoods.push_back(std::move(s));
  }

  const json& rates = need("rates");
  if (!rates.is_array()) field_error(where + "rates", "expected array of \"p/q\" strings");
  for (std::size_t i = 0; i < rates.size(); ++i) {
    net.rates.push_back(rational_from_json(rates[i], where + "rates[" + std::to_string(i) + "]"));
  }
  return net;
}

StorageNetwork parse_network(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "at line L, column C" in the message
    throw ParseError(e.what());
  }
  return network_from_json(j);
}

json network_as_json(const StorageNetwork& net) {
  json j;
  j["n"] = net.n;
  j["neighborhoods"] = net.neighborhoods;
  j["rates"] = rational_list(net.rates);
  return j;
}

std::string network_to_json(const StorageNetwork& net) { return dump_json(network_as_json(net)); }

json rational_list(const std::vector<Rational>& values) {
  json arr = json::array();
  for (const auto& v : values) arr.push_back(v.to_string());
  return arr;
}

json rational_matrix(const std::vector<std::vector<Rational>>& rows) {
  json arr = json::array();
  for (const auto& r : rows) arr.push_back(rational_list(r));
  return arr;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void dump_into(const json& j, int indent, int depth, std::string& out) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_into(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // arrays of scalars stay on one line
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += flat ? ", " : ",";
        if (!flat) newline(depth + 1);
        dump_into(j[i], indent, depth + 1, out);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_double(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::string out;
  dump_into(j, indent, 0, out);
  return out;
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace shapestab
