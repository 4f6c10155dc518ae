#pragma once

// Per-column sample storage with spill-to-disk. Values are buffered in
// memory; once the buffered total passes the threshold every column buffer is
// sorted and written out as a run. Reading merges the runs and the remaining
// buffer into one ascending stream.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "erw/error.hpp"

namespace erw {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// FNV-1a 64.
class Fnv1a {
public:
  void update(const void* data, std::size_t len) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(const std::string& s) noexcept { update(s.data(), s.size()); }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(const std::string& s) {
  Fnv1a h;
  h.update(s);
  return h.hex();
}

// ---------------------------------------------------------------------------
// Sidecar column files: "ERWCOL01", u64 count, then count f64, all LE.

inline constexpr char kSidecarMagic[8] = {'E', 'R', 'W', 'C', 'O', 'L', '0', '1'};

class SidecarWriter {
public:
  explicit SidecarWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open sidecar " + path.string());
    const std::uint64_t zero = 0;
    out_.write(kSidecarMagic, 8);
    out_.write(reinterpret_cast<const char*>(&zero), 8);
  }

  void push(double v) {
    out_.write(reinterpret_cast<const char*>(&v), 8);
    ++count_;
  }

  /// Finalizes the header; returns the FNV-1a of the whole file.
  std::string close() {
    out_.seekp(8);
    out_.write(reinterpret_cast<const char*>(&count_), 8);
    out_.close();
    if (!out_) throw IoError("failed writing sidecar " + path_.string());
    return hash_file(path_);
  }

  std::uint64_t count() const noexcept { return count_; }

  static std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    Fnv1a h;
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
  }

private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t count_ = 0;
};

inline std::vector<double> read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open sidecar " + path.string());
  char magic[8];
  std::uint64_t count = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || !std::equal(magic, magic + 8, kSidecarMagic))
    throw FormatError("not a sidecar column file: " + path.string());
  std::vector<double> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * 8));
  if (static_cast<std::uint64_t>(in.gcount()) != count * 8)
    throw FormatError("truncated sidecar column file: " + path.string());
  return v;
}

// ---------------------------------------------------------------------------

class ColumnStore {
public:
  /// spill_threshold: buffered values across all columns before spilling;
  /// 0 disables spilling.
  ColumnStore(std::size_t columns, std::size_t spill_threshold, std::filesystem::path spill_dir)
      : buf_(columns), runs_(columns), counts_(columns, 0), threshold_(spill_threshold),
        dir_(std::move(spill_dir)) {}

  ColumnStore(const ColumnStore&) = delete;
  ColumnStore& operator=(const ColumnStore&) = delete;

  ~ColumnStore() {
    std::error_code ec;
    for (const auto& col : runs_)
      for (const auto& p : col) std::filesystem::remove(p, ec);
  }

  std::size_t columns() const noexcept { return buf_.size(); }
  std::int64_t count(std::size_t col) const { return counts_.at(col); }
  std::size_t spilled_runs() const noexcept {
    std::size_t k = 0;
    for (const auto& c : runs_) k += c.size();
    return k;
  }

  void push(std::size_t col, double v) {
    buf_[col].push_back(v);
    ++counts_[col];
    if (threshold_ > 0 && ++buffered_ >= threshold_) spill();
  }

  /// Calls fn(value) for every value of the column in ascending order.
  template <class Fn>
  void for_each_sorted(std::size_t col, Fn&& fn) {
    auto& b = buf_[col];
    std::sort(b.begin(), b.end());
    if (runs_[col].empty()) {
      for (double v : b) fn(v);
      return;
    }
    struct Source {
      std::ifstream in;
      std::vector<double> chunk;
      std::size_t pos = 0;
      bool refill() {
        chunk.resize(4096);
        in.read(reinterpret_cast<char*>(chunk.data()),
                static_cast<std::streamsize>(chunk.size() * sizeof(double)));
        chunk.resize(static_cast<std::size_t>(in.gcount()) / sizeof(double));
        pos = 0;
        return !chunk.empty();
      }
    };
    std::vector<Source> src(runs_[col].size());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t i = 0; i < src.size(); ++i) {
      src[i].in.open(runs_[col][i], std::ios::binary);
      if (!src[i].in) throw IoError("cannot reopen spill run " + runs_[col][i].string());
      if (src[i].refill()) heap.emplace(src[i].chunk[0], i);
    }
    const std::size_t mem = src.size();
    std::size_t mem_pos = 0;
    if (!b.empty()) heap.emplace(b[0], mem);
    while (!heap.empty()) {
      const auto [v, i] = heap.top();
      heap.pop();
      fn(v);
      if (i == mem) {
        if (++mem_pos < b.size()) heap.emplace(b[mem_pos], mem);
      } else {
        auto& s = src[i];
        if (++s.pos < s.chunk.size() || s.refill()) heap.emplace(s.chunk[s.pos], i);
      }
    }
  }

  std::vector<double> sorted(std::size_t col) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(counts_[col]));
    for_each_sorted(col, [&](double v) { out.push_back(v); });
    return out;
  }

private:
  void spill() {
    std::filesystem::create_directories(dir_);
    for (std::size_t c = 0; c < buf_.size(); ++c) {
      auto& b = buf_[c];
      if (b.empty()) continue;
      std::sort(b.begin(), b.end());
      const auto path = dir_ / ("run_" + std::to_string(c) + "_" + std::to_string(runs_[c].size()) + ".f64");
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(b.data()),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
      if (!out) throw IoError("failed writing spill run " + path.string());
      runs_[c].push_back(path);
      b.clear();
      b.shrink_to_fit();
    }
    buffered_ = 0;
  }

  std::vector<std::vector<double>> buf_;
  std::vector<std::vector<std::filesystem::path>> runs_;
  std::vector<std::int64_t> counts_;
  std::size_t threshold_;
  std::size_t buffered_ = 0;
  std::filesystem::path dir_;
};

}  // namespace erw
