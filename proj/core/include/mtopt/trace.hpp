#pragma once

#include <string>
#include <vector>

#include "mtopt/analysis.hpp"

namespace mtopt {

// Append-only JSONL trace. The first line is a schema header; every later
// line is one TraceRecord.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, int task_count);
  ~TraceWriter();
  void append(const TraceRecord& r);
  void close();

 private:
  struct Impl;
  Impl* impl_;
};

struct TraceFile {
  int task_count = 0;
  std::vector<TraceRecord> records;
};

TraceFile read_trace(const std::string& path);

}  // namespace mtopt
