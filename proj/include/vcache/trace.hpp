#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vcache/types.hpp"

namespace vcache {

class TraceError : public Error {
 public:
  using Error::Error;
};

/// One labeled prompt of a replay trace (JSON-lines schema: id, prompt,
/// embedding, class_id, gold_response).
struct TraceRecord {
  std::int64_t id = 0;
  std::string prompt;
  std::optional<EmbeddingVector> embedding;
  std::optional<std::int64_t> class_id;
  std::optional<std::string> gold_response;

  bool labeled() const { return class_id.has_value() || gold_response.has_value(); }

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

/// Parses JSON lines in file order. Unknown fields are ignored; blank lines
/// are skipped. Labels are not checked here (replay rejects unlabeled
/// records). Throws TraceError with the 1-based line number.
std::vector<TraceRecord> parse_trace(std::istream& in);
std::vector<TraceRecord> load_trace(const std::string& path);

void write_trace(std::ostream& out, const std::vector<TraceRecord>& records);
void save_trace(const std::string& path, const std::vector<TraceRecord>& records);

}  // namespace vcache
