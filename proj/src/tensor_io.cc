// src/tensor_io.cc

// Copyright 2026 The spikealign authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "spikealign/tensor_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spikealign/error.hpp"

namespace spikealign {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'K', 'A', 'L', 'N', '0', '1'};

void put_u32_le(std::string* out, std::uint32_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
  out->push_back(static_cast<char>((v >> 16) & 0xff));
  out->push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32_le(std::string* out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32_le(out, bits);
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

std::size_t checked_product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) {
    if (d < 1) throw DataError("tensor dims must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError("empty integer field in " + what);
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw DataError("bad integer '" + s + "' in " + what);
  }
  if (pos != s.size()) throw DataError("bad integer '" + s + "' in " + what);
  return static_cast<int>(v);
}

double parse_double(const std::string& s, const std::string& what) {
  if (s.empty()) throw DataError("empty number field in " + what);
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' in " + what);
  }
  if (pos != s.size()) throw DataError("bad number '" + s + "' in " + what);
  return v;
}

}  // namespace

void write_tensor(const std::string& path, const std::vector<int>& dims,
                  const std::vector<double>& values) {
  if (dims.empty() || dims.size() > 3)
    throw DataError("tensor rank must be in {1,2,3}, got " +
                    std::to_string(dims.size()));
  const std::size_t n = checked_product(dims);
  if (n != values.size())
    throw DataError("tensor dims imply " + std::to_string(n) +
                    " values, got " + std::to_string(values.size()));

  std::string buf;
  buf.reserve(8 + 4 + 4 * dims.size() + 4 * n);
  buf.append(kMagic, sizeof(kMagic));
  put_u32_le(&buf, static_cast<std::uint32_t>(dims.size()));
  for (int d : dims) put_u32_le(&buf, static_cast<std::uint32_t>(d));
  for (double v : values) put_f32_le(&buf, static_cast<float>(v));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw DataError("write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open tensor file: " + path);
  std::string raw((std::istreambuf_iterator<char>(is)),
                  std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());

  if (raw.size() < sizeof(kMagic) + 4 ||
      std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0)
    throw DataError("bad magic in tensor file: " + path);

  std::size_t off = sizeof(kMagic);
  const std::uint32_t rank = get_u32_le(p + off);
  off += 4;
  if (rank < 1 || rank > 3)
    throw DataError("tensor rank outside {1,2,3} in " + path);
  if (raw.size() < off + 4 * rank)
    throw DataError("truncated tensor header in " + path);

  Tensor t;
  for (std::uint32_t i = 0; i < rank; ++i) {
    t.dims.push_back(static_cast<int>(get_u32_le(p + off)));
    off += 4;
  }
  const std::size_t n = checked_product(t.dims);
  if (raw.size() != off + 4 * n)
    throw DataError(raw.size() < off + 4 * n
                        ? "truncated tensor payload in " + path
                        : "trailing bytes after tensor payload in " + path);
  t.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.values.push_back(static_cast<double>(get_f32_le(p + off)));
    off += 4;
  }
  return t;
}

Matrix tensor_to_matrix(const Tensor& t) {
  if (t.dims.size() != 2)
    throw DataError("expected rank-2 tensor, got rank " +
                    std::to_string(t.dims.size()));
  Matrix m(t.dims[0], t.dims[1]);
  m.data() = t.values;
  return m;
}

Tensor3 tensor_to_tensor3(const Tensor& t) {
  if (t.dims.size() != 3)
    throw DataError("expected rank-3 tensor, got rank " +
                    std::to_string(t.dims.size()));
  Tensor3 out(t.dims[0], t.dims[1], t.dims[2]);
  out.data() = t.values;
  return out;
}

void write_matrix(const std::string& path, const Matrix& m) {
  write_tensor(path, {m.rows(), m.cols()}, m.data());
}

void write_tensor3(const std::string& path, const Tensor3& t) {
  write_tensor(path, {t.dim0(), t.dim1(), t.dim2()}, t.data());
}

void write_label_records(const std::string& path,
                         const std::vector<LabelRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  char buf[64];
  for (const auto& r : records) {
    if (r.id.empty()) throw DataError("label record with empty id");
    if (r.soft && r.probs.size() != r.tokens.size())
      throw DataError("soft record '" + r.id + "' has mismatched prob count");
    os << r.id << '\t';
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (r.tokens[i] < 0)
        throw DataError("negative token in record '" + r.id + "'");
      if (i > 0) os << ' ';
      if (r.soft) {
        const double p = r.probs[i];
        if (p < 0.0 || p > 1.0)
          throw DataError("probability outside [0,1] in record '" + r.id + "'");
        std::snprintf(buf, sizeof(buf), "t%zu:%d:%.6f", i, r.tokens[i], p);
      } else {
        std::snprintf(buf, sizeof(buf), "t%zu:%d", i, r.tokens[i]);
      }
      os << buf;
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<LabelRecord> read_label_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open label records: " + path);
  std::vector<LabelRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError("malformed label record line at " + where);
    LabelRecord r;
    r.id = line.substr(0, tab);

    std::istringstream fields(line.substr(tab + 1));
    std::string field;
    bool arity_known = false;
    std::size_t frame = 0;
    while (fields >> field) {
      const auto parts = split(field, ':');
      if (parts.size() != 2 && parts.size() != 3)
        throw DataError("malformed entry '" + field + "' at " + where);
      if (parts[0].size() < 2 || parts[0][0] != 't')
        throw DataError("entry missing frame prefix at " + where);
      const int fidx = parse_int(parts[0].substr(1), where);
      if (fidx != static_cast<int>(frame))
        throw DataError("frame indices out of order at " + where);
      const bool soft = parts.size() == 3;
      if (!arity_known) {
        r.soft = soft;
        arity_known = true;
      } else if (soft != r.soft) {
        throw DataError("mixed hard/soft entries at " + where);
      }
      const int tok = parse_int(parts[1], where);
      if (tok < 0) throw DataError("negative token at " + where);
      r.tokens.push_back(tok);
      if (soft) {
        const double p = parse_double(parts[2], where);
        if (p < 0.0 || p > 1.0)
          throw DataError("probability outside [0,1] at " + where);
        r.probs.push_back(p);
      }
      ++frame;
    }
    if (r.tokens.empty())
      throw DataError("label record with no frames at " + where);
    out.push_back(std::move(r));
  }
  return out;
}

void check_record_frames(const LabelRecord& record, int expected_frames) {
  if (static_cast<int>(record.tokens.size()) != expected_frames)
    throw DataError("record '" + record.id + "' has " +
                    std::to_string(record.tokens.size()) + " frames, expected " +
                    std::to_string(expected_frames));
}

namespace {

void validate_utterance(const UtteranceRecord& r) {
  if (r.id.empty()) throw DataError("utterance with empty id");
  if (r.num_frames < 1)
    throw DataError("utterance '" + r.id + "' needs frames >= 1");
  if (r.tokens.empty())
    throw DataError("utterance '" + r.id + "' has no tokens");
  for (int t : r.tokens) {
    if (t < 1)
      throw DataError("utterance '" + r.id +
                      "' token indices must be >= 1 (blank is 0)");
  }
  if (!r.words.empty()) {
    // Token spans must partition 0..U-1 in order.
    int expect = 0;
    for (const auto& w : r.words) {
      if (w.word.empty())
        throw DataError("empty word string in utterance '" + r.id + "'");
      if (w.token_begin != expect || w.token_end < w.token_begin)
        throw DataError("word spans do not partition tokens in '" + r.id + "'");
      if (w.end_frame < 0 || w.end_frame >= r.num_frames)
        throw DataError("word end frame out of range in '" + r.id + "'");
      expect = w.token_end + 1;
    }
    if (expect != static_cast<int>(r.tokens.size()))
      throw DataError("word spans do not cover all tokens in '" + r.id + "'");
  }
}

}  // namespace

void write_manifest(const std::string& path,
                    const std::vector<UtteranceRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open for write: " + path);
  for (const auto& r : records) {
    validate_utterance(r);
    os << r.id << "\tframes=" << r.num_frames << "\ttokens=";
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (i > 0) os << ',';
      os << r.tokens[i];
    }
    if (!r.feats_path.empty()) os << "\tfeats=" << r.feats_path;
    if (!r.logits_path.empty()) os << "\tlogits=" << r.logits_path;
    if (!r.words.empty()) {
      os << "\twords=";
      for (std::size_t i = 0; i < r.words.size(); ++i) {
        const auto& w = r.words[i];
        if (i > 0) os << ',';
        os << w.word << ':' << w.token_begin << '-' << w.token_end << ':'
           << w.end_frame;
      }
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

std::vector<UtteranceRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  std::vector<UtteranceRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto fields = split(line, '\t');
    if (fields.size() < 2) throw DataError("malformed manifest line at " + where);
    UtteranceRecord r;
    r.id = fields[0];
    bool have_frames = false, have_tokens = false;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::size_t eq = fields[i].find('=');
      if (eq == std::string::npos)
        throw DataError("manifest field without '=' at " + where);
      const std::string key = fields[i].substr(0, eq);
      const std::string val = fields[i].substr(eq + 1);
      if (key == "frames") {
        r.num_frames = parse_int(val, where);
        have_frames = true;
      } else if (key == "tokens") {
        for (const auto& s : split(val, ',')) r.tokens.push_back(parse_int(s, where));
        have_tokens = true;
      } else if (key == "feats") {
        r.feats_path = val;
      } else if (key == "logits") {
        r.logits_path = val;
      } else if (key == "words") {
        for (const auto& s : split(val, ',')) {
          const auto parts = split(s, ':');
          if (parts.size() != 3)
            throw DataError("malformed word boundary '" + s + "' at " + where);
          const auto span = split(parts[1], '-');
          if (span.size() != 2)
            throw DataError("malformed token span '" + parts[1] + "' at " + where);
          WordBoundary w;
          w.word = parts[0];
          w.token_begin = parse_int(span[0], where);
          w.token_end = parse_int(span[1], where);
          w.end_frame = parse_int(parts[2], where);
          r.words.push_back(std::move(w));
        }
      } else {
        throw DataError("unknown manifest key '" + key + "' at " + where);
      }
    }
    if (!have_frames || !have_tokens)
      throw DataError("manifest line missing frames= or tokens= at " + where);
    try {
      validate_utterance(r);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at " + where);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string parent_dir(const std::string& path) {
  const std::size_t pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string() : path.substr(0, pos);
}

std::string join_path(const std::string& dir, const std::string& rel) {
  if (dir.empty() || (!rel.empty() && rel[0] == '/')) return rel;
  return dir + "/" + rel;
}

}  // namespace spikealign
