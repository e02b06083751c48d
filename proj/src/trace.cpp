#include "trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "errors.hpp"
#include "threading.hpp"

namespace idp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void atomic_write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("atomic_write_file: cannot open " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("atomic_write_file: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("atomic_write_file: rename to " + path + " failed");
  }
}

std::string trace_to_csv(const TrainingTrace& trace) {
  std::ostringstream out;
  out << "# config_hash=" << trace.config_hash << "\n";
  out << "iter,optimizer,overall_loss,overall_acc";
  for (int g : trace.group_ids) out << ",group_loss_" << g;
  for (int g : trace.group_ids) out << ",group_recall_" << g;
  out << ",mid_lhs";
  for (int o : trace.owner_ids) out << ",eps_bar_spent_" << o;
  out << "\n";
  for (const TraceRow& r : trace.rows) {
    out << r.iter << "," << r.optimizer << "," << fmt(r.overall_loss) << ","
        << fmt(r.overall_acc);
    for (double v : r.group_loss) out << "," << fmt(v);
    for (double v : r.group_recall) out << "," << fmt(v);
    out << "," << fmt(r.mid_lhs);
    for (double v : r.eps_bar_spent) out << "," << fmt(v);
    out << "\n";
  }
  return out.str();
}

void write_trace_csv(const TrainingTrace& trace, const std::string& path) {
  atomic_write_file(path, trace_to_csv(trace));
}

TrainingTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_trace_csv: cannot open " + path);
  TrainingTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_trace_csv: empty file " + path);
  const std::string hash_prefix = "# config_hash=";
  if (line.rfind(hash_prefix, 0) == 0) {
    trace.config_hash = line.substr(hash_prefix.size());
    if (!std::getline(in, line)) throw IoError("read_trace_csv: missing header in " + path);
  }
  const auto header = split_csv(line);
  std::size_t n_groups = 0, n_owners = 0;
  for (const auto& col : header) {
    if (col.rfind("group_loss_", 0) == 0) {
      trace.group_ids.push_back(std::atoi(col.c_str() + 11));
      ++n_groups;
    } else if (col.rfind("eps_bar_spent_", 0) == 0) {
      trace.owner_ids.push_back(std::atoi(col.c_str() + 14));
      ++n_owners;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != header.size()) throw IoError("read_trace_csv: ragged row in " + path);
    TraceRow row;
    std::size_t i = 0;
    row.iter = std::atol(f[i++].c_str());
    row.optimizer = f[i++];
    row.overall_loss = std::atof(f[i++].c_str());
    row.overall_acc = std::atof(f[i++].c_str());
    for (std::size_t g = 0; g < n_groups; ++g) row.group_loss.push_back(std::atof(f[i++].c_str()));
    for (std::size_t g = 0; g < n_groups; ++g)
      row.group_recall.push_back(std::atof(f[i++].c_str()));
    row.mid_lhs = std::atof(f[i++].c_str());
    for (std::size_t o = 0; o < n_owners; ++o)
      row.eps_bar_spent.push_back(std::atof(f[i++].c_str()));
    trace.rows.push_back(std::move(row));
  }
  return trace;
}

EvalMetrics evaluate_model(const Model& model, const LabeledDataset& data,
                           const OwnerPartition& partition, const std::vector<int>& group_ids) {
  const int n = data.size();
  EvalMetrics m;
  std::map<int, int> group_index;
  for (std::size_t i = 0; i < group_ids.size(); ++i) group_index[group_ids[i]] = static_cast<int>(i);
  m.group_loss.assign(group_ids.size(), 0.0);
  m.group_recall.assign(group_ids.size(), 0.0);
  std::vector<double> group_count(group_ids.size(), 0.0);

  std::vector<double> losses(n);
  std::vector<int> correct(n);
  parallel_for(n, [&](int i) {
    losses[i] = forward_loss(model, data.row(i), data.labels[i]);
    correct[i] = predict(model, data.row(i)) == data.labels[i] ? 1 : 0;
  });
  double loss_sum = 0.0, correct_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    loss_sum += losses[i];
    correct_sum += correct[i];
    const int g = group_index.at(partition.group_of[i]);
    m.group_loss[g] += losses[i];
    m.group_recall[g] += correct[i];
    group_count[g] += 1.0;
  }
  m.overall_loss = n > 0 ? loss_sum / n : 0.0;
  m.overall_acc = n > 0 ? correct_sum / n : 0.0;
  for (std::size_t g = 0; g < group_ids.size(); ++g) {
    if (group_count[g] > 0.0) {
      m.group_loss[g] /= group_count[g];
      m.group_recall[g] /= group_count[g];
    }
  }
  return m;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace idp
