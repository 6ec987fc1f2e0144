#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sdia/errors.hpp"

namespace sdia {

enum class BusType { slack, pv, pq };

struct BusRecord {
  int bus_id = 0;
  BusType bus_type = BusType::pq;

  friend bool operator==(const BusRecord&, const BusRecord&) = default;
};

struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double reactance_x = 0.0;
  bool in_service = true;

  friend bool operator==(const BranchRecord&, const BranchRecord&) = default;
};

struct GridCase {
  std::string name;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;

  friend bool operator==(const GridCase&, const GridCase&) = default;
};

namespace detail {

inline std::string strip_comment(const std::string& line) {
  const auto pos = line.find('%');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

inline std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ';' || c == ',') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& tok, int line_no,
                           const char* what) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    throw validation_error("malformed " + std::string(what) + " '" + tok +
                           "' (line " + std::to_string(line_no) + ")");
  }
  return v;
}

inline int parse_int(const std::string& tok, int line_no, const char* what) {
  const double v = parse_number(tok, line_no, what);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw validation_error("non-integer " + std::string(what) + " '" + tok +
                           "' (line " + std::to_string(line_no) + ")");
  }
  return i;
}

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Structural validation shared by the parser and by directly constructed
// cases: unique bus ids, exactly one slack, branch endpoints present and
// distinct, positive reactance, and a connected in-service topology.
inline void validate_grid_case(const GridCase& gc) {
  if (gc.buses.empty()) throw validation_error("case has no buses");
  if (gc.branches.empty()) throw validation_error("case has no branches");

  std::vector<int> ids;
  int n_slack = 0;
  for (const auto& b : gc.buses) {
    for (int seen : ids) {
      if (seen == b.bus_id) {
        throw validation_error("duplicate bus id " +
                               std::to_string(b.bus_id));
      }
    }
    ids.push_back(b.bus_id);
    if (b.bus_type == BusType::slack) ++n_slack;
  }
  if (n_slack != 1) {
    throw validation_error("case must have exactly one slack bus, found " +
                           std::to_string(n_slack));
  }

  auto bus_pos = [&](int id) -> int {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    return -1;
  };

  for (const auto& br : gc.branches) {
    if (bus_pos(br.from_bus) < 0 || bus_pos(br.to_bus) < 0) {
      throw validation_error("branch " + std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus) +
                             " references an unknown bus");
    }
    if (br.from_bus == br.to_bus) {
      throw validation_error("branch with identical endpoints at bus " +
                             std::to_string(br.from_bus));
    }
    if (!(br.reactance_x > 0.0)) {
      throw validation_error("nonpositive reactance on branch " +
                             std::to_string(br.from_bus) + "-" +
                             std::to_string(br.to_bus));
    }
  }

  // Connectivity over in-service branches only.
  const int nb = static_cast<int>(gc.buses.size());
  std::vector<std::vector<int>> adj(nb);
  bool any_in_service = false;
  for (const auto& br : gc.branches) {
    if (!br.in_service) continue;
    any_in_service = true;
    const int a = bus_pos(br.from_bus), b = bus_pos(br.to_bus);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  if (!any_in_service) {
    throw validation_error("case has no in-service branches");
  }
  std::vector<char> seen(nb, 0);
  std::vector<int> stack = {0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    for (int b : adj[a]) {
      if (!seen[b]) {
        seen[b] = 1;
        stack.push_back(b);
      }
    }
  }
  for (int i = 0; i < nb; ++i) {
    if (!seen[i]) {
      throw validation_error(
          "in-service network is disconnected (bus " +
          std::to_string(gc.buses[i].bus_id) + " unreachable)");
    }
  }
}

// Parses the MATPOWER case subset: the function line (for the case name) and
// the mpc.bus / mpc.branch tables. All other blocks (gen, gencost, ...) are
// skipped. Bus rows use columns 1-2 (id, type); branch rows use columns 1-4
// plus the status column 11 when present (missing status means in service).
// Errors carry the 1-based line number of the offending row.
inline GridCase parse_case(const std::string& text,
                           const std::string& fallback_name = "case") {
  GridCase gc;
  gc.name = fallback_name;

  enum class Block { none, bus, branch, other };
  Block block = Block::none;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = detail::strip_comment(raw);

    if (block == Block::none) {
      const auto fn = line.find("function");
      if (fn != std::string::npos) {
        const auto eq = line.find('=', fn);
        if (eq != std::string::npos) {
          const auto fields = detail::split_fields(line.substr(eq + 1));
          if (!fields.empty()) gc.name = fields.back();
        }
        continue;
      }
      // Returns the position just past '[' when `key` opens a table here.
      auto open_block = [&](const char* key) -> std::size_t {
        const auto at = line.find(key);
        if (at == std::string::npos) return std::string::npos;
        const auto br = line.find('[', at);
        return br == std::string::npos ? std::string::npos : br + 1;
      };
      if (const auto p = open_block("mpc.bus"); p != std::string::npos) {
        // "mpc.bus_name" and friends must not open the bus table.
        const auto at = line.find("mpc.bus");
        const char after = at + 7 < line.size() ? line[at + 7] : ' ';
        if (after == ' ' || after == '\t' || after == '=') {
          block = Block::bus;
          line = line.substr(p);  // rows may share the opening line
        } else {
          block = Block::other;
          continue;
        }
      } else if (const auto q = open_block("mpc.branch");
                 q != std::string::npos) {
        block = Block::branch;
        line = line.substr(q);
      } else if (line.find('[') != std::string::npos &&
                 line.find("mpc.") != std::string::npos) {
        block = Block::other;
        continue;
      } else {
        continue;
      }
    }

    // Inside a table. A ']' closes it; data may precede it on the same line.
    bool closes = false;
    const auto close_at = line.find(']');
    if (close_at != std::string::npos) {
      closes = true;
      line = line.substr(0, close_at);
    }
    const auto fields = detail::split_fields(line);
    if (!fields.empty() && block != Block::other) {
      if (block == Block::bus) {
        if (fields.size() < 2) {
          throw validation_error("bus row needs at least 2 columns (line " +
                                 std::to_string(line_no) + ")");
        }
        BusRecord b;
        b.bus_id = detail::parse_int(fields[0], line_no, "bus id");
        const int t = detail::parse_int(fields[1], line_no, "bus type");
        switch (t) {
          case 1: b.bus_type = BusType::pq; break;
          case 2: b.bus_type = BusType::pv; break;
          case 3: b.bus_type = BusType::slack; break;
          default:
            throw validation_error("unknown bus type " + std::to_string(t) +
                                   " (line " + std::to_string(line_no) + ")");
        }
        gc.buses.push_back(b);
      } else {
        if (fields.size() < 4) {
          throw validation_error(
              "branch row needs at least 4 columns (line " +
              std::to_string(line_no) + ")");
        }
        BranchRecord br;
        br.from_bus = detail::parse_int(fields[0], line_no, "from bus");
        br.to_bus = detail::parse_int(fields[1], line_no, "to bus");
        br.reactance_x = detail::parse_number(fields[3], line_no, "reactance");
        if (!(br.reactance_x > 0.0)) {
          throw validation_error("nonpositive reactance (line " +
                                 std::to_string(line_no) + ")");
        }
        br.in_service = true;
        if (fields.size() >= 11) {
          br.in_service =
              detail::parse_int(fields[10], line_no, "branch status") != 0;
        }
        gc.branches.push_back(br);
      }
    }
    if (closes) block = Block::none;
  }

  validate_grid_case(gc);
  return gc;
}

// Writes the subset back out as a loadable MATPOWER file. Only the columns
// the parser reads are meaningful; the rest are padded with zeros (and a
// unit status column). parse_case(serialize_case(gc)) == gc.
inline std::string serialize_case(const GridCase& gc) {
  std::ostringstream os;
  os << "function mpc = " << gc.name << "\n";
  os << "mpc.version = '2';\n";
  os << "mpc.baseMVA = 100;\n\n";
  os << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n";
  os << "mpc.bus = [\n";
  for (const auto& b : gc.buses) {
    int t = 1;
    if (b.bus_type == BusType::pv) t = 2;
    if (b.bus_type == BusType::slack) t = 3;
    os << "\t" << b.bus_id << "\t" << t << "\t0 0 0 0 1 1 0 0 1 1.1 0.9;\n";
  }
  os << "];\n\n";
  os << "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin "
        "angmax\n";
  os << "mpc.branch = [\n";
  for (const auto& br : gc.branches) {
    os << "\t" << br.from_bus << "\t" << br.to_bus << "\t0\t"
       << detail::fmt_g17(br.reactance_x) << "\t0 0 0 0 0 0\t"
       << (br.in_service ? 1 : 0) << "\t-360 360;\n";
  }
  os << "];\n";
  return os.str();
}

}  // namespace sdia
