#ifndef CALORON_RUNNER_HPP
#define CALORON_RUNNER_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "caloron/hymflow.hpp"

namespace caloron {

// One batch run: map input, grid, flow settings, observable toggles.
struct RunConfig {
  std::string map_text;   // map spec JSON (embedded object, canonicalized)
  GridSpec grid;
  FlowConfig flow;
  bool obs_charge = true;
  bool obs_energy = true;
  bool obs_decay = true;
  std::vector<std::pair<double, double>> exhaust_schedule;
  std::string output_dir = "out";
  std::string resume;     // checkpoint path, optional
  std::uint64_t seed = 12345;

  std::string canonical() const;       // stable serialization, hashed into reports
  std::uint64_t config_hash() const;   // FNV-1a of canonical()
};

// Parses the run-config JSON. Relative map_file references resolve against
// base_dir. Throws std::invalid_argument / std::runtime_error on bad input.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir);

// FNV-1a, 64 bit.
std::uint64_t fnv1a(const std::string& s);

// Exit codes: 0 converged, 1 invalid input, 2 flow did not converge.
int cmd_run(const RunConfig& cfg);

// Invariant suite on the configured instance; one line per check on stdout.
// Exit codes: 0 all pass, 1 invalid input, 3 invariant failure.
int cmd_verify(const RunConfig& cfg);

// Checkpoint export; formats: csv, json, vtk. Exit 0 / 1.
int cmd_export(const std::string& checkpoint, const std::string& format,
               const std::string& out_path, double mu);

}  // namespace caloron

#endif
