#pragma once

#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "carnot/frames.hpp"
#include "carnot/hcdiff.hpp"

namespace carnot::experiments {

// Flat string parameters with typed accessors; every accessor throws ConfigError on bad input.
class Params {
public:
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string str(const std::string& key) const;
    double num(const std::string& key) const;
    int integer(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;
    std::vector<std::string> words(const std::string& key) const;
    // Empty value means the zero vector; shorter lists are zero padded, longer ones truncated.
    Vec vec(const std::string& key, int dim) const;

private:
    std::map<std::string, std::string> values_;
};

struct Config {
    std::string frame = "heisenberg1";
    std::string experiment;
    std::uint64_t seed = 1;
    std::string out = "carnot-out";
    Params params; // user-supplied, before defaults
};

// Lines "key = value", "[section]" headers, "#" comments. Top-level keys: frame, experiment, seed, out.
// Parameters live in [params] or in a section named after the experiment id.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

struct Parameter {
    std::string name;
    std::string fallback;
    std::string help;
};

struct ExperimentInfo {
    std::string id;
    std::vector<int> criteria; // acceptance rows this experiment gates
    std::string theorem;
    std::string summary;
    std::vector<Parameter> parameters;
};

const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& id);
std::string list_experiments();

struct Assertion {
    int criterion = 0;
    std::string name;
    double value = 0.0;
    std::string relation; // "<", "<=", ">=", "in", "true"
    double bound = 0.0;
    double bound_hi = 0.0;
    bool pass = false;
};

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct Report {
    std::string experiment;
    std::string frame;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> parameters; // resolved, defaults included
    std::map<std::string, double> constants;
    std::vector<Assertion> assertions;
    std::deque<Table> tables; // stable references while experiments append

    bool pass() const;
};

// Built-in name, or a JSON polynomial frame file (path ending in .json).
frames::FramePtr load_frame(const std::string& spec);
frames::FramePtr polynomial_frame_from_json(const std::string& text, const std::string& name);

// Named real-valued maps on a chart: x, y, t (last coordinate), x+y, x0..x7, and "a*b" products of those.
hcdiff::SmoothMap named_map(const std::string& name, int dim);

Report run(const Config& config);

std::string summary_json(const Report& report);
std::string table_csv(const Table& table);
// Writes summary.json and <table>.csv into dir, creating it if needed.
void write_report(const Report& report, const std::string& dir);

// 0 pass, 1 assertion failure, 2 ConfigError, 3 LeftDomain, 4 NoConvergence, 5 GuardNotVanishing, 6 other.
int exit_code(const std::exception& e);
int exit_code(const Report& report);
std::string exit_code_help();

std::string format_number(double v);
std::size_t edit_distance(const std::string& a, const std::string& b);

} // namespace carnot::experiments
