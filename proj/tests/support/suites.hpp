#pragma once

// Checks shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dualgan/experiment.hpp"

namespace dualgan::testing {

// -- finite-difference gradients ----------------------------------------------

struct GradCheckConfig {
  double step = 1e-5;
  double tolerance = 1e-4;  // on ||analytic - numeric|| / max(||analytic||, ||numeric||)
  int shapes_per_primitive = 20;
  std::uint64_t seed = 7;
};

struct PrimitiveGradResult {
  std::string name;
  int shapes_checked = 0;
  double worst_error = 0.0;
  std::string worst_case;  // shape description of the worst case
  bool pass = false;
};

std::vector<PrimitiveGradResult> run_gradient_suite(const GradCheckConfig& config = {});

/// Relative error between the tape gradient and central differences for a
/// function of the given inputs, projected to a scalar with random weights.
double gradient_error(const std::function<Var64(std::vector<Var64>&)>& f, std::vector<Tensor64> inputs,
                      double step, std::uint64_t seed);

// -- table conformance --------------------------------------------------------

struct TableRow {
  std::string name, input, output;
  int kernel = 0, stride = 0;  // 0 means the table leaves the cell empty
};

/// Rows as printed in the architecture tables (Discriminator 2 input read as
/// 256,256,3).
std::vector<TableRow> reference_table(NetworkKind kind);

/// Mismatch descriptions; empty when the shape report matches the table.
std::vector<std::string> table_mismatches(NetworkKind kind);

// -- scheduler ----------------------------------------------------------------

struct SchedulerCase {
  std::string label;
  SchedulerState state;
  Action expected;
};

std::vector<SchedulerCase> scheduler_cases();

// -- isolation and clipping ---------------------------------------------------

struct IsolationResult {
  int steps = 0;
  int isolation_violations = 0;
  int clip_violations = 0;
  int encoder_violations = 0;
  int unchanged_targets = 0;  // steps where the designated set did not move
  std::map<std::string, int> actions;
  std::vector<std::string> messages;
  double seconds = 0.0;
};

/// Desk run mixing scheduler decisions with randomly forced actions so that
/// every action kind is exercised.
IsolationResult isolation_run(int steps, std::uint64_t seed, const std::filesystem::path& dir);

// -- packing ------------------------------------------------------------------

/// Number of random quartets whose pack/unpack round trip is not bit-exact.
int pack_roundtrip_failures(int quartets, std::uint64_t seed);

/// A small desk dataset shared by tests.
struct DeskFixture {
  Manifest manifest;
  std::unique_ptr<ImageStore> store;
};
DeskFixture make_desk_fixture(const std::filesystem::path& dir, std::uint64_t seed = 1, int identities = 16);

/// Temporary directory unique to this process.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace dualgan::testing
