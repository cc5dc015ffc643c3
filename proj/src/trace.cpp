#include "vcache/trace.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace vcache {

using nlohmann::json;

namespace {

TraceRecord parse_record(const std::string& line) {
  const json j = json::parse(line);
  if (!j.is_object()) throw TraceError("record is not a JSON object");
  TraceRecord r;
  r.id = j.at("id").get<std::int64_t>();
  r.prompt = j.value("prompt", std::string());
  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    const auto values = it->get<std::vector<double>>();
    r.embedding = EmbeddingVector(std::span<const double>(values));
  }
  if (auto it = j.find("class_id"); it != j.end() && !it->is_null()) {
    r.class_id = it->get<std::int64_t>();
  }
  if (auto it = j.find("gold_response"); it != j.end() && !it->is_null()) {
    r.gold_response = it->get<std::string>();
  }
  return r;
}

}  // namespace

std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::unordered_set<std::int64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TraceRecord r;
    try {
      r = parse_record(line);
    } catch (const std::exception& e) {
      throw TraceError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!seen.insert(r.id).second) {
      throw TraceError("line " + std::to_string(line_no) + ": duplicate id " +
                       std::to_string(r.id));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace " + path);
  return parse_trace(in);
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const auto& r : records) {
    json j = {{"id", r.id}, {"prompt", r.prompt}};
    if (r.embedding) j["embedding"] = r.embedding->to_std();
    if (r.class_id) j["class_id"] = *r.class_id;
    if (r.gold_response) j["gold_response"] = *r.gold_response;
    out << j.dump() << '\n';
  }
}

void save_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw TraceError("cannot write trace " + path);
  write_trace(out, records);
  if (!out) throw TraceError("write failed: " + path);
}

}  // namespace vcache
