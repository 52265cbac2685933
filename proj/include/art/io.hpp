#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "art/core_model.hpp"
#include "art/error.hpp"

// File formats. Indices and states are 1-based on disk and 0-based in
// memory.
//
//   observations  agent,event,value
//   graph         u,v        (one undirected edge per row, u < v)
//   truths        event,true_state
//   communities   agent,true_community
//   estimate      event,state,p1,...,pR
namespace art::io {

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

inline long long parse_integer(const std::string& s, const std::string& where) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error(where + ": expected an integer, got '" + s + "'");
  return v;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot write " + path.string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Reads a headed CSV of integer columns; returns rows with their line
// numbers.
struct IntRow {
  std::size_t line;
  std::vector<long long> values;
};

inline std::vector<IntRow> read_int_csv(const std::filesystem::path& path, const std::vector<std::string>& header) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  std::vector<IntRow> rows;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (!saw_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw Error(path.string() + ":" + std::to_string(lineno) + ": expected header '" + want + "'");
      }
      saw_header = true;
      continue;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() < header.size())
      throw Error(where + ": expected " + std::to_string(header.size()) + " fields");
    IntRow row{lineno, {}};
    for (const auto& f : fields) row.values.push_back(parse_integer(f, where));
    rows.push_back(std::move(row));
  }
  if (!saw_header) throw Error(path.string() + ": empty file");
  return rows;
}

}  // namespace detail

struct Dimensions {
  std::optional<std::size_t> n_agents;
  std::optional<std::size_t> n_events;
  std::optional<int> n_states;
};

// Dimensions not given are inferred as the largest index seen.
inline ObservationMatrix read_observations(const std::filesystem::path& path, const Dimensions& dims = {}) {
  const auto rows = detail::read_int_csv(path, {"agent", "event", "value"});
  std::vector<Observation> entries;
  long long max_agent = 0, max_event = 0, max_state = 0;
  for (const auto& r : rows) {
    const std::string where = path.string() + ":" + std::to_string(r.line);
    const auto [a, e, v] = std::tuple{r.values[0], r.values[1], r.values[2]};
    if (a < 1 || e < 1) throw Error(where + ": indices are 1-based");
    if (v < 1) throw Error(where + ": state values are 1-based");
    max_agent = std::max(max_agent, a);
    max_event = std::max(max_event, e);
    max_state = std::max(max_state, v);
    entries.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(e - 1), static_cast<int>(v - 1)});
  }
  return ObservationMatrix(dims.n_agents.value_or(static_cast<std::size_t>(max_agent)),
                           dims.n_events.value_or(static_cast<std::size_t>(max_event)),
                           dims.n_states.value_or(static_cast<int>(max_state)), entries);
}

inline void write_observations(const ObservationMatrix& obs, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "agent,event,value\n";
  for (const auto& e : obs.entries()) out << e.agent + 1 << ',' << e.event + 1 << ',' << e.state + 1 << '\n';
}

inline SocialGraph read_graph(const std::filesystem::path& path, std::size_t n_agents) {
  const auto rows = detail::read_int_csv(path, {"u", "v"});
  std::vector<SocialGraph::Edge> edges;
  for (const auto& r : rows) {
    if (r.values[0] < 1 || r.values[1] < 1)
      throw Error(path.string() + ":" + std::to_string(r.line) + ": agent indices are 1-based");
    edges.emplace_back(static_cast<std::size_t>(r.values[0] - 1), static_cast<std::size_t>(r.values[1] - 1));
  }
  return SocialGraph(n_agents, std::move(edges));
}

inline void write_graph(const SocialGraph& graph, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "u,v\n";
  for (const auto& [u, v] : graph.edges()) out << u + 1 << ',' << v + 1 << '\n';
}

// Labels (truth states or community indices) keyed by a 1-based id.
inline std::vector<int> read_labels(const std::filesystem::path& path, const std::string& key, const std::string& value) {
  const auto rows = detail::read_int_csv(path, {key, value});
  std::map<long long, int> by_id;
  for (const auto& r : rows) {
    const std::string where = path.string() + ":" + std::to_string(r.line);
    if (r.values[0] < 1 || r.values[1] < 1) throw Error(where + ": ids and labels are 1-based");
    if (!by_id.emplace(r.values[0], static_cast<int>(r.values[1] - 1)).second) throw Error(where + ": duplicate id");
  }
  std::vector<int> out;
  long long expect = 1;
  for (const auto& [id, label] : by_id) {
    if (id != expect) throw Error(path.string() + ": missing " + key + " " + std::to_string(expect));
    out.push_back(label);
    ++expect;
  }
  return out;
}

inline void write_labels(const std::vector<int>& labels, const std::filesystem::path& path, const std::string& key,
                         const std::string& value) {
  auto out = detail::open_out(path);
  out << key << ',' << value << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) out << i + 1 << ',' << labels[i] + 1 << '\n';
}

inline std::vector<int> read_truths(const std::filesystem::path& path) { return read_labels(path, "event", "true_state"); }
inline void write_truths(const std::vector<int>& t, const std::filesystem::path& path) {
  write_labels(t, path, "event", "true_state");
}

inline void write_estimate(const TruthEstimate& est, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out.precision(17);
  out << "event,state";
  for (Eigen::Index r = 0; r < est.confidence.cols(); ++r) out << ",p" << r + 1;
  out << '\n';
  for (std::size_t j = 0; j < est.states.size(); ++j) {
    out << j + 1 << ',' << est.states[j] + 1;
    for (Eigen::Index r = 0; r < est.confidence.cols(); ++r) out << ',' << est.confidence(static_cast<Eigen::Index>(j), r);
    out << '\n';
  }
}

inline TruthEstimate read_estimate(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file");
  const auto header = detail::split_fields(line);
  if (header.size() < 3 || header[0] != "event" || header[1] != "state")
    throw Error(path.string() + ":1: expected header 'event,state,p1,...'");
  const auto R = static_cast<Eigen::Index>(header.size() - 2);
  std::vector<std::vector<double>> conf;
  TruthEstimate est;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = detail::split_fields(line);
    if (static_cast<Eigen::Index>(f.size()) != R + 2) throw Error(where + ": wrong number of fields");
    if (detail::parse_integer(f[0], where) != static_cast<long long>(est.states.size() + 1))
      throw Error(where + ": events must be listed in order");
    est.states.push_back(static_cast<int>(detail::parse_integer(f[1], where) - 1));
    std::vector<double> row;
    for (Eigen::Index r = 0; r < R; ++r) {
      try {
        row.push_back(std::stod(f[static_cast<std::size_t>(r + 2)]));
      } catch (const std::exception&) {
        throw Error(where + ": bad probability '" + f[static_cast<std::size_t>(r + 2)] + "'");
      }
    }
    conf.push_back(std::move(row));
  }
  est.confidence.resize(static_cast<Eigen::Index>(conf.size()), R);
  for (std::size_t j = 0; j < conf.size(); ++j)
    for (Eigen::Index r = 0; r < R; ++r) est.confidence(static_cast<Eigen::Index>(j), r) = conf[j][static_cast<std::size_t>(r)];
  return est;
}

// --- IMDB-format ratings ----------------------------------------------------

// 0-based level of a 0..10 rating: 0-4, 5-6, 7-8, 9-10.
inline int imdb_level(long long rating) {
  if (rating < 0 || rating > 10) throw Error("rating " + std::to_string(rating) + " outside 0..10");
  if (rating <= 4) return 0;
  if (rating <= 6) return 1;
  if (rating <= 8) return 2;
  return 3;
}

struct ImdbDataset {
  ObservationMatrix obs;
  SocialGraph graph;
  std::vector<std::string> agent_ids;  // index -> user id as written in the file
  std::vector<std::string> event_ids;  // index -> movie id
  std::size_t n_ratings = 0;
  std::size_t n_dropped_edges = 0;  // edges touching users without ratings
};

namespace detail {

// Splits on commas, tabs or spaces.
inline std::vector<std::string> tokens(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline bool is_integer(const std::string& s) {
  long long v;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

// Ratings file: one "user movie rating" triple per line (comma, tab or
// space separated); an optional non-numeric header line is skipped; '#'
// starts a comment. Edges file: one "follower followee" pair per line.
// Users and movies are indexed in order of first appearance in the ratings
// file. Edges are symmetrized; self-loops and edges touching users who rated
// nothing are dropped.
inline ImdbDataset load_imdb(const std::filesystem::path& ratings_path, const std::filesystem::path& edges_path) {
  ImdbDataset ds;
  std::map<std::string, std::size_t> agents, events;
  auto index_of = [](std::map<std::string, std::size_t>& ids, std::vector<std::string>& order, const std::string& key) {
    auto [it, inserted] = ids.emplace(key, order.size());
    if (inserted) order.push_back(key);
    return it->second;
  };

  std::vector<Observation> entries;
  {
    auto in = detail::open_in(ratings_path);
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto t = detail::tokens(line);
      if (t.empty()) continue;
      const std::string where = ratings_path.string() + ":" + std::to_string(lineno);
      if (first && t.size() == 3 && !detail::is_integer(t[2])) {
        first = false;
        continue;
      }
      first = false;
      if (t.size() != 3) throw Error(where + ": expected 'user movie rating'");
      if (!detail::is_integer(t[2])) throw Error(where + ": rating '" + t[2] + "' is not an integer");
      int level;
      try {
        level = imdb_level(detail::parse_integer(t[2], where));
      } catch (const Error& e) {
        throw Error(where + ": " + e.what());
      }
      entries.push_back({index_of(agents, ds.agent_ids, t[0]), index_of(events, ds.event_ids, t[1]), level});
    }
  }
  ds.n_ratings = entries.size();
  try {
    ds.obs = ObservationMatrix(ds.agent_ids.size(), ds.event_ids.size(), 4, entries);
  } catch (const Error& e) {
    throw Error(ratings_path.string() + ": " + e.what());
  }

  std::vector<SocialGraph::Edge> edges;
  {
    auto in = detail::open_in(edges_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto t = detail::tokens(line);
      if (t.empty()) continue;
      if (t.size() != 2) throw Error(edges_path.string() + ":" + std::to_string(lineno) + ": expected 'user user'");
      const auto a = agents.find(t[0]);
      const auto b = agents.find(t[1]);
      if (a == agents.end() || b == agents.end()) {
        if (lineno == 1 && !detail::is_integer(t[0]) && !detail::is_integer(t[1])) continue;  // header
        ++ds.n_dropped_edges;
        continue;
      }
      if (a->second == b->second) continue;
      edges.emplace_back(a->second, b->second);
    }
  }
  ds.graph = SocialGraph(ds.agent_ids.size(), std::move(edges));
  return ds;
}

}  // namespace art::io
