#include "rsen/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rsen/errors.hpp"

namespace rsen {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParamError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParamError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ParamError("config: key '" + key + "' needs a boolean, got '" + v + "'");
}

void set_key(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "cube") c.cube = value;
  else if (key == "labels") c.labels = value;
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "checkpoint") c.checkpoint = value;
  else if (key == "learning_rate") c.train.learning_rate = to_double(key, value);
  else if (key == "labeled_batch") c.train.labeled_batch = to_int(key, value);
  else if (key == "unlabeled_batch") c.train.unlabeled_batch = to_int(key, value);
  else if (key == "epochs") c.train.epochs = to_int(key, value);
  else if (key == "alpha") c.train.alpha = to_double(key, value);
  else if (key == "m") c.train.m = to_int(key, value);
  else if (key == "noise_std") c.train.noise_std = to_double(key, value);
  else if (key == "w") c.train.w = to_int(key, value);
  else if (key == "p") c.train.p = to_int(key, value);
  else if (key == "n_per_class") c.train.n_per_class = to_int(key, value);
  else if (key == "n_unlabeled") c.train.n_unlabeled = to_int(key, value);
  else if (key == "fixed_q") {
    if (value == "none") c.train.fixed_q.reset();
    else c.train.fixed_q = to_int(key, value);
  } else if (key == "no_filter") c.train.no_filter = to_bool(key, value);
  else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "repetitions") c.repetitions = to_int(key, value);
  else if (key == "eval_each_epoch") c.eval_each_epoch = to_bool(key, value);
  else if (key == "mask_background") c.mask_background = to_bool(key, value);
  else throw ParamError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParamError("config: cannot open " + path);
  RunConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParamError("config: " + path + ":" + std::to_string(lineno) +
                       ": expected 'key = value'");
    set_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParamError("config: override '" + assignment + "' is not key=value");
  set_key(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void write_resolved_config(const RunConfig& config, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParamError("config: cannot write " + path);
  os << std::setprecision(17);
  os << "cube = " << config.cube << "\n";
  os << "labels = " << config.labels << "\n";
  os << "out_dir = " << config.out_dir << "\n";
  os << "checkpoint = " << config.checkpoint_path() << "\n";
  os << "learning_rate = " << config.train.learning_rate << "\n";
  os << "labeled_batch = " << config.train.labeled_batch << "\n";
  os << "unlabeled_batch = " << config.train.unlabeled_batch << "\n";
  os << "epochs = " << config.train.epochs << "\n";
  os << "alpha = " << config.train.alpha << "\n";
  os << "m = " << config.train.m << "\n";
  os << "noise_std = " << config.train.noise_std << "\n";
  os << "w = " << config.train.w << "\n";
  os << "p = " << config.train.p << "\n";
  os << "n_per_class = " << config.train.n_per_class << "\n";
  os << "n_unlabeled = " << config.train.n_unlabeled << "\n";
  os << "fixed_q = "
     << (config.train.fixed_q ? std::to_string(*config.train.fixed_q) : std::string("none"))
     << "\n";
  os << "no_filter = " << (config.train.no_filter ? "true" : "false") << "\n";
  os << "seed = " << config.train.seed << "\n";
  os << "repetitions = " << config.repetitions << "\n";
  os << "eval_each_epoch = " << (config.eval_each_epoch ? "true" : "false") << "\n";
  os << "mask_background = " << (config.mask_background ? "true" : "false") << "\n";
  if (!os) throw ParamError("config: write failed on " + path);
}

}  // namespace rsen
