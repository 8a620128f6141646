#pragma once

// Orchestration behind the command-line tool: single runs, K-sweeps, the
// validation suite, and CSV emission. Everything writes to caller-supplied
// streams so the same code is exercised by tests and by the executable.

#include <reflev/analytics.hpp>
#include <reflev/config.hpp>
#include <reflev/estimation.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace reflev {

enum ExitCode : int { kExitPass = 0, kExitValidation = 1, kExitConfig = 2, kExitRuntime = 3 };

/// printf("%.17g"); round-trips every double.
std::string format_number(double x);

void write_loss_csv(std::ostream& out, const std::vector<LossRateReport>& reports);
/// One row per (V-bin, A-bin) cell, then the contact cells (V = A) whose
/// V-range repeats the A-range of their column.
void write_hist_csv(std::ostream& out, const StationaryHistogram& hist);
void write_asymptotics_csv(std::ostream& out, const AsymptoticsReport& report);

/// Reads K and rate/CI columns from a CSV with a header. Accepts either
/// (K, loss_rate, ci) or the loss.csv layout (K, l_K, ci, ...).
std::vector<LossPoint> read_loss_table(std::istream& in);

/// Throws ConfigError("E X_1 >= 0 ...") when the model has no stationary regime.
void require_stationary(const LevyModel& model);

struct SimulationResult {
    LossRateReport report;
    PathAccumulators totals;
};

SimulationResult run_simulation(const RunConfig& cfg, double buffer);

struct SweepResult {
    std::vector<LossRateReport> reports;
    /// Flat-barrier references at K and at K - a (empty unless requested).
    std::vector<LossRateReport> reference_at_k;
    std::vector<LossRateReport> reference_below;
    AsymptoticsReport fit;
    std::optional<AsymptoticsReport> reference_fit;
};

/// Needs at least 4 distinct K (ConfigError otherwise).
SweepResult run_sweep(const RunConfig& cfg);

enum class CheckStatus { kPass, kFail, kSkip };

struct CheckRow {
    std::string name;
    CheckStatus status = CheckStatus::kSkip;
    double value = 0.0;
    double threshold = 0.0;
    std::string detail;
};

std::vector<CheckRow> run_validation(const RunConfig& cfg);

int cmd_model_info(const RunConfig& cfg, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& out);
int cmd_validate(const RunConfig& cfg, std::ostream& out);

}  // namespace reflev
