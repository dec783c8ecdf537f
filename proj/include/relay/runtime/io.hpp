#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relay/core/model.hpp"
#include "relay/error.hpp"

namespace relay {

/// A stream of dataset rows for one partition. `next` returns nullopt at the
/// end and throws on a read failure.
class TaskSource {
 public:
  virtual ~TaskSource() = default;
  virtual std::optional<TaskInput> next() = 0;
};

class VectorSource final : public TaskSource {
 public:
  explicit VectorSource(std::vector<TaskInput> rows) : rows_(std::move(rows)) {}

  std::optional<TaskInput> next() override {
    if (pos_ >= rows_.size()) return std::nullopt;
    return std::move(rows_[pos_++]);
  }

 private:
  std::vector<TaskInput> rows_;
  std::size_t pos_ = 0;
};

/// Turns one JSON line into a task. The id comes from `task_id`, then `id`,
/// then `<prefix><line number>`.
inline TaskInput parse_task_line(const std::string& line, std::uint64_t line_no, const std::string& prefix,
                                 std::uint32_t partition) {
  Json row = Json::parse(line, nullptr, false);
  if (row.is_discarded() || !row.is_object())
    throw Error(Errc::io_error, prefix + std::to_string(line_no) + ": not a JSON object");
  TaskInput t;
  if (row.contains("task_id") && row["task_id"].is_string())
    t.task_id = row["task_id"].get<std::string>();
  else if (row.contains("id") && (row["id"].is_string() || row["id"].is_number_integer()))
    t.task_id = row["id"].is_string() ? row["id"].get<std::string>() : std::to_string(row["id"].get<long long>());
  else
    t.task_id = prefix + std::to_string(line_no);
  t.payload = std::move(row);
  t.partition_id = partition;
  return t;
}

/// Reads the non-blank lines of a JSONL file whose zero-based index falls in
/// [first, last).
class JsonlFileSource final : public TaskSource {
 public:
  JsonlFileSource(std::filesystem::path path, std::uint32_t partition, std::uint64_t first = 0,
                  std::uint64_t last = UINT64_MAX)
      : path_(std::move(path)), partition_(partition), first_(first), last_(last) {}

  std::optional<TaskInput> next() override {
    if (!in_) {
      in_.emplace(path_);
      if (!*in_) throw Error(Errc::io_error, "cannot open " + path_.string());
    }
    std::string line;
    while (index_ < last_ && std::getline(*in_, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto i = index_++;
      if (i < first_) continue;
      return parse_task_line(line, i, path_.stem().string() + ":", partition_);
    }
    if (in_->bad()) throw Error(Errc::io_error, "read failure on " + path_.string());
    return std::nullopt;
  }

 private:
  std::filesystem::path path_;
  std::uint32_t partition_;
  std::uint64_t first_;
  std::uint64_t last_;
  std::uint64_t index_ = 0;
  std::optional<std::ifstream> in_;
};

/// Counts the non-blank lines of a JSONL file.
inline std::uint64_t count_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::uint64_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) ++n;
  return n;
}

/// Where the sink persists one line per finished task.
class OutputSink {
 public:
  virtual ~OutputSink() = default;
  virtual void write(const std::string& line) = 0;
  virtual void flush() {}
};

class MemoryOutput final : public OutputSink {
 public:
  void write(const std::string& line) override {
    std::lock_guard lock(mu_);
    lines_.push_back(line);
  }

  std::vector<std::string> lines() const {
    std::lock_guard lock(mu_);
    return lines_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

class FileOutput final : public OutputSink {
 public:
  explicit FileOutput(const std::filesystem::path& path) : out_(path, std::ios::out | std::ios::trunc) {
    if (!out_) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  }

  void write(const std::string& line) override {
    std::lock_guard lock(mu_);
    out_ << line << '\n';
    if (!out_) throw Error(Errc::io_error, "write failed");
  }

  void flush() override {
    std::lock_guard lock(mu_);
    out_.flush();
  }

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// Drops every line. Used by benchmarks that only need counters.
class NullOutput final : public OutputSink {
 public:
  void write(const std::string&) override {}
};

}  // namespace relay
