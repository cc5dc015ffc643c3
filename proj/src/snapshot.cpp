#include "vcache/snapshot.hpp"

#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace vcache {

namespace {

enum RecordType : std::uint32_t { kConfig = 1, kEntry = 2, kGlobal = 3, kEnd = 4 };

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const std::vector<std::uint8_t>& b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  bool done() const { return pos_ == size_; }
  std::size_t remaining() const { return size_ - pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  const std::uint8_t* take(std::size_t n) {
    need(n);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw SnapshotError("corrupt record: unexpected end of data");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(std::uint32_t type, const std::uint8_t* payload, std::size_t n) {
  std::uint8_t type_bytes[4];
  for (int i = 0; i < 4; ++i) type_bytes[i] = static_cast<std::uint8_t>(type >> (8 * i));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, type_bytes, 4);
  crc = crc32(crc, payload, static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

void put_record(Writer& out, std::uint32_t type, Writer& payload) {
  const auto& p = payload.bytes();
  out.u32(type);
  out.u32(static_cast<std::uint32_t>(p.size()));
  out.raw(p);
  out.u32(checksum(type, p.data(), p.size()));
}

Writer encode_config(const CacheConfig& c) {
  Writer w;
  w.f64(c.delta);
  w.u64(c.min_observations);
  w.u32(static_cast<std::uint32_t>(c.epsilon_grid.size()));
  for (double e : c.epsilon_grid) w.f64(e);
  w.f64(c.gamma_max);
  w.f64(c.l2_regularization);
  w.str(c.similarity_metric);
  w.u8(c.rng_seed.has_value());
  w.u64(c.rng_seed.value_or(0));
  w.u8(c.insert_on_correct);
  w.u8(static_cast<std::uint8_t>(c.label_mode));
  w.u8(c.async_labeling);
  w.u8(static_cast<std::uint8_t>(c.index_engine));
  w.u64(c.hnsw.m);
  w.u64(c.hnsw.ef_construction);
  w.u64(c.hnsw.ef_search);
  w.u64(c.hnsw.seed);
  return w;
}

CacheConfig decode_config(Reader& r) {
  CacheConfig c;
  c.delta = r.f64();
  c.min_observations = r.u64();
  const std::uint32_t n = r.u32();
  if (n > r.remaining() / 8) throw SnapshotError("corrupt record: epsilon grid length");
  c.epsilon_grid.resize(n);
  for (auto& e : c.epsilon_grid) e = r.f64();
  c.gamma_max = r.f64();
  c.l2_regularization = r.f64();
  c.similarity_metric = r.str();
  const bool has_seed = r.u8() != 0;
  const std::uint64_t seed = r.u64();
  if (has_seed) c.rng_seed = seed;
  c.insert_on_correct = r.u8() != 0;
  c.label_mode = static_cast<LabelMode>(r.u8());
  c.async_labeling = r.u8() != 0;
  c.index_engine = static_cast<IndexEngine>(r.u8());
  c.hnsw.m = r.u64();
  c.hnsw.ef_construction = r.u64();
  c.hnsw.ef_search = r.u64();
  c.hnsw.seed = r.u64();
  return c;
}

void encode_observations(Writer& w, const std::vector<Observation>& obs) {
  w.u64(obs.size());
  for (const auto& o : obs) {
    w.f64(o.similarity);
    w.u8(o.correct);
  }
}

std::vector<Observation> decode_observations(Reader& r) {
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 9) throw SnapshotError("corrupt record: observation count");
  std::vector<Observation> obs(n);
  for (auto& o : obs) {
    o.similarity = r.f64();
    o.correct = r.u8() != 0;
  }
  return obs;
}

Writer encode_entry(const CacheEntry& e) {
  Writer w;
  w.i64(e.entry_id);
  w.i64(e.created_at_ms);
  const auto& v = e.embedding.values();
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v[i]);
  w.str(e.response);
  encode_observations(w, e.observations);
  return w;
}

CacheEntry decode_entry(Reader& r) {
  CacheEntry e;
  e.entry_id = r.i64();
  e.created_at_ms = r.i64();
  const std::uint32_t dim = r.u32();
  if (dim > r.remaining() / 8) throw SnapshotError("corrupt record: embedding dimension");
  Eigen::VectorXd v(dim);
  for (std::uint32_t i = 0; i < dim; ++i) v[i] = r.f64();
  e.embedding = EmbeddingVector(std::move(v));
  e.response = r.str();
  e.observations = decode_observations(r);
  return e;
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const CacheState& state) {
  Writer out;
  for (char c : kSnapshotMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(kSnapshotVersion);

  Writer config = encode_config(state.config);
  put_record(out, kConfig, config);
  for (const auto& e : state.entries) {
    Writer entry = encode_entry(e);
    put_record(out, kEntry, entry);
  }
  Writer global;
  encode_observations(global, state.global_observations);
  put_record(out, kGlobal, global);
  Writer end;
  end.i64(state.next_entry_id);
  end.u64(state.entries.size());
  put_record(out, kEnd, end);
  return std::move(out.bytes());
}

CacheState decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size());
  if (bytes.size() < 8 || !std::equal(std::begin(kSnapshotMagic), std::end(kSnapshotMagic),
                                      bytes.begin())) {
    throw SnapshotError("not a snapshot: bad magic");
  }
  r.take(4);
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) {
    throw SnapshotError("unsupported version " + std::to_string(version));
  }

  CacheState state;
  bool have_config = false;
  bool have_end = false;
  std::size_t index = 0;
  while (!r.done()) {
    if (have_end) throw SnapshotError("corrupt record: data after end record");
    const std::uint32_t type = r.u32();
    const std::uint32_t length = r.u32();
    const std::uint8_t* payload = r.take(length);
    const std::uint32_t stored = r.u32();
    if (stored != checksum(type, payload, length)) {
      throw SnapshotError("corrupt record " + std::to_string(index) + ": checksum mismatch");
    }
    Reader body(payload, length);
    switch (type) {
      case kConfig:
        state.config = decode_config(body);
        have_config = true;
        break;
      case kEntry:
        state.entries.push_back(decode_entry(body));
        break;
      case kGlobal:
        state.global_observations = decode_observations(body);
        break;
      case kEnd: {
        state.next_entry_id = body.i64();
        const std::uint64_t count = body.u64();
        if (count != state.entries.size()) {
          throw SnapshotError("corrupt record: entry count mismatch");
        }
        have_end = true;
        break;
      }
      default:
        throw SnapshotError("corrupt record " + std::to_string(index) + ": unknown type " +
                            std::to_string(type));
    }
    if (!body.done()) {
      throw SnapshotError("corrupt record " + std::to_string(index) + ": trailing bytes");
    }
    ++index;
  }
  if (!have_config || !have_end) throw SnapshotError("corrupt record: snapshot is truncated");
  return state;
}

std::size_t save_snapshot(const CacheState& state, const std::string& path) {
  const std::vector<std::uint8_t> bytes = encode_snapshot(state);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SnapshotError("cannot open " + tmp + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw SnapshotError("write failed: " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw SnapshotError("cannot rename snapshot into place: " + ec.message());
  }
  return bytes.size();
}

std::size_t save_snapshot(const SemanticCache& cache, const std::string& path) {
  return save_snapshot(cache.export_state(), path);
}

CacheState read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open snapshot " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

std::unique_ptr<SemanticCache> load_snapshot(const std::string& path, const PolicyKind& policy) {
  return std::make_unique<SemanticCache>(read_snapshot(path), policy);
}

}  // namespace vcache
