#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "twomem/dynamics.hpp"
#include "twomem/quantum.hpp"

namespace twomem {

/// Trajectories per reduction block. Sums inside a block run in index order
/// and blocks merge through a fixed binary tree, so results never depend on
/// worker count or shard size.
inline constexpr std::size_t kBlockSize = 32;

struct HistogramSpec {
    PlaneTransform transform = PlaneTransform::Zero();
    std::string label;
    double h = 0.05;
    double half_extent = 5.0;
};

struct EnsembleSpec {
    std::uint64_t realizations = 1;
    /// Trajectories per shard (rounded up to whole blocks); a checkpoint is
    /// written after every shard.
    std::uint64_t shard_size = 1024;
    std::uint64_t master_seed = 0;

    ModelTier tier = ModelTier::FirstOrder;
    PhysicalParams params;
    double Q1 = 0.0, Q2 = 0.0;
    CouplingSet couplings;
    DriveSpec drive;
    bool noise = true;
    double ordering = kSymmetricOrdering;
    /// Draw the initial (x, y, q, p) from independent N(0, 1/2); otherwise start at the origin.
    bool vacuum_initial = true;

    double dtau = 0.01;
    /// Observation times in tau = omega_bar t, strictly increasing, each a
    /// multiple of dtau (rounded to the nearest step).
    std::vector<double> sample_taus;

    /// Histograms are filled at the last sample time.
    std::vector<HistogramSpec> histograms;

    void validate() const;
    /// Stable text form of everything that affects the numbers.
    std::string canonical() const;
    /// Hex SHA-256 of canonical().
    std::string digest() const;
};

struct EnsembleResult {
    std::vector<CovarianceState> moments;
    std::vector<double> En;
    std::vector<double> duan_plus;   ///< alpha = +1
    std::vector<double> duan_minus;  ///< alpha = -1
    std::vector<PhaseSpaceHistogram> histograms;
    std::uint64_t requested = 0;
    std::uint64_t realized = 0;
    std::uint64_t aborted = 0;
    std::uint64_t master_seed = 0;
    std::string spec_digest;
    bool complete = false;
    double runtime_seconds = 0.0;
};

struct RunControl {
    /// Checkpoint file; empty disables checkpointing.
    std::filesystem::path checkpoint;
    /// Continue from the checkpoint if it exists.
    bool resume = false;
    /// Stop after this many shards in this call (0 = run to completion).
    std::uint64_t max_shards = 0;
};

/// Runs (or continues) the ensemble. Throws EnsembleAborted when more than
/// 0.1% of trajectories abort, CheckpointError on a corrupt checkpoint or one
/// written for a different spec.
EnsembleResult run_ensemble(const EnsembleSpec& spec, unsigned workers = 0, const RunControl& control = {});

/// Integrates one trajectory and returns the u-vectors at the sample times.
/// Exposed for tests.
std::vector<Vec6> simulate_trajectory(const EnsembleSpec& spec, const DynamicsModel& model, std::uint64_t index);

/// Stream id of the initial-state draws; the integrator noise uses `index`.
inline constexpr std::uint64_t kInitialStreamBit = std::uint64_t{1} << 63;

}  // namespace twomem
