#include "mtopt/trace.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "mtopt/errors.hpp"

namespace mtopt {

using nlohmann::json;

struct TraceWriter::Impl {
  std::ofstream out;
};

TraceWriter::TraceWriter(const std::string& path, int task_count) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw ConfigError("cannot open trace file for writing: " + path);
  }
  json header = {{"schema", "mtopt-trace-v1"}, {"task_count", task_count}};
  impl_->out << header.dump() << "\n";
}

TraceWriter::~TraceWriter() {
  close();
  delete impl_;
}

void TraceWriter::append(const TraceRecord& r) {
  json j = {{"step", r.step},
            {"task_losses", r.task_losses},
            {"alpha", r.alpha},
            {"sim_task", r.sim_task},
            {"sim_share", r.sim_share},
            {"grad_norm_share", r.grad_norm_share},
            {"update_norm_share", r.update_norm_share}};
  impl_->out << j.dump() << "\n";
}

void TraceWriter::close() {
  if (impl_->out.is_open()) impl_->out.close();
}

TraceFile read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace file is empty: " + path);
  json header = json::parse(line);
  if (header.value("schema", "") != "mtopt-trace-v1")
    throw ConfigError("unsupported trace schema in " + path);

  TraceFile tf;
  tf.task_count = header.at("task_count").get<int>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    TraceRecord r;
    r.step = j.at("step").get<int>();
    r.task_losses = j.at("task_losses").get<std::vector<double>>();
    r.alpha = j.at("alpha").get<std::vector<double>>();
    r.sim_task = j.at("sim_task").get<double>();
    r.sim_share = j.at("sim_share").get<double>();
    r.grad_norm_share = j.at("grad_norm_share").get<std::vector<double>>();
    r.update_norm_share = j.at("update_norm_share").get<double>();
    tf.records.push_back(std::move(r));
  }
  return tf;
}

}  // namespace mtopt
