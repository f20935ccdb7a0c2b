#include "twomem/ensemble.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "twomem/digest.hpp"
#include "twomem/errors.hpp"
#include "twomem/parallel.hpp"

namespace twomem {

namespace {

constexpr char kMagic[8] = {'T', 'W', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::size_t kTerms = 27;  // 6 sums + 21 cross products
constexpr double kAbortLimit = 1e-3;

// Neumaier-compensated sums of u_i and u_i u_j for every sample time.
struct MomentSums {
    std::uint64_t n = 0;
    std::vector<double> sum;
    std::vector<double> comp;

    explicit MomentSums(std::size_t times = 0) : sum(times * kTerms, 0.0), comp(times * kTerms, 0.0) {}

    void add_term(std::size_t k, double x) {
        const double s = sum[k];
        const double t = s + x;
        comp[k] += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        sum[k] = t;
    }

    void add(const std::vector<Vec6>& u) {
        ++n;
        for (std::size_t ti = 0; ti < u.size(); ++ti) {
            const std::size_t base = ti * kTerms;
            for (std::size_t i = 0; i < 6; ++i) add_term(base + i, u[ti](i));
            for (std::size_t i = 0; i < 6; ++i)
                for (std::size_t j = i; j < 6; ++j) add_term(base + 6 + packed_index(i, j), u[ti](i) * u[ti](j));
        }
    }

    void merge(const MomentSums& other) {
        n += other.n;
        for (std::size_t k = 0; k < sum.size(); ++k) {
            add_term(k, other.sum[k]);
            comp[k] += other.comp[k];
        }
    }

    double value(std::size_t k) const { return sum[k] + comp[k]; }
};

struct StackEntry {
    std::uint32_t level = 0;
    MomentSums sums;
};

struct BlockOutcome {
    MomentSums sums;
    std::uint64_t aborted = 0;
    std::vector<PhaseSpaceHistogram> histograms;
};

// Binary-counter reduction: merging equal levels keeps the tree shape a pure
// function of the block sequence.
void push_block(std::vector<StackEntry>& stack, MomentSums sums) {
    stack.push_back({0, std::move(sums)});
    while (stack.size() >= 2 && stack[stack.size() - 1].level == stack[stack.size() - 2].level) {
        StackEntry top = std::move(stack.back());
        stack.pop_back();
        stack.back().sums.merge(top.sums);
        ++stack.back().level;
    }
}

MomentSums fold_stack(const std::vector<StackEntry>& stack, std::size_t times) {
    MomentSums total(times);
    for (const auto& e : stack) total.merge(e.sums);
    return total;
}

// --- checkpoint serialisation --------------------------------------------

class Writer {
public:
    template <class T>
    void pod(const T& v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void raw(const void* data, std::size_t size) {
        const auto* p = static_cast<const char*>(data);
        bytes_.insert(bytes_.end(), p, p + size);
    }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const char> bytes) : bytes_(bytes) {}
    template <class T>
    T pod() {
        T v;
        raw(&v, sizeof(T));
        return v;
    }
    void raw(void* out, std::size_t size) {
        if (pos_ + size > bytes_.size()) throw CheckpointError("checkpoint truncated");
        std::memcpy(out, bytes_.data() + pos_, size);
        pos_ += size;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

struct Progress {
    std::uint64_t next_block = 0;
    std::uint64_t aborted = 0;
    std::vector<StackEntry> stack;
    std::vector<PhaseSpaceHistogram> histograms;
};

void write_sums(Writer& w, const MomentSums& s) {
    w.pod(s.n);
    w.pod(static_cast<std::uint64_t>(s.sum.size()));
    w.raw(s.sum.data(), s.sum.size() * sizeof(double));
    w.raw(s.comp.data(), s.comp.size() * sizeof(double));
}

MomentSums read_sums(Reader& r, std::size_t times) {
    MomentSums s(times);
    s.n = r.pod<std::uint64_t>();
    const auto size = r.pod<std::uint64_t>();
    if (size != s.sum.size()) throw CheckpointError("checkpoint moment layout does not match the spec");
    r.raw(s.sum.data(), size * sizeof(double));
    r.raw(s.comp.data(), size * sizeof(double));
    return s;
}

void save_checkpoint(const std::filesystem::path& path, const std::string& spec_digest, const Progress& p) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.pod(kCheckpointVersion);
    w.raw(spec_digest.data(), spec_digest.size());
    w.pod(p.next_block);
    w.pod(p.aborted);
    w.pod(static_cast<std::uint64_t>(p.stack.size()));
    for (const auto& e : p.stack) {
        w.pod(e.level);
        write_sums(w, e.sums);
    }
    w.pod(static_cast<std::uint64_t>(p.histograms.size()));
    for (const auto& h : p.histograms) {
        w.pod(h.total());
        w.pod(h.inside());
        w.pod(static_cast<std::uint64_t>(h.counts().size()));
        w.raw(h.counts().data(), h.counts().size() * sizeof(std::uint64_t));
    }
    const Sha256 digest = sha256(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(w.bytes().data()), w.bytes().size()));

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(fmt::format("cannot write checkpoint '{}'", tmp.string()));
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        out.write(reinterpret_cast<const char*>(digest.data()), static_cast<std::streamsize>(digest.size()));
        out.flush();
        if (!out) throw CheckpointError(fmt::format("failed writing checkpoint '{}'", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

Progress load_checkpoint(const std::filesystem::path& path, const std::string& spec_digest, const EnsembleSpec& spec) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path.string()));
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 32) throw CheckpointError("checkpoint truncated");
    const std::size_t body = bytes.size() - 32;
    const Sha256 digest =
        sha256(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), body));
    if (std::memcmp(digest.data(), bytes.data() + body, 32) != 0)
        throw CheckpointError("checkpoint content digest mismatch (file corrupt)");

    Reader r(std::span<const char>(bytes.data(), body));
    char magic[sizeof(kMagic)];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not a twomem checkpoint");
    if (r.pod<std::uint32_t>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
    std::string stored(spec_digest.size(), '\0');
    r.raw(stored.data(), stored.size());
    if (stored != spec_digest) throw CheckpointError("checkpoint was written for a different ensemble spec");

    const std::size_t times = spec.sample_taus.size();
    Progress p;
    p.next_block = r.pod<std::uint64_t>();
    p.aborted = r.pod<std::uint64_t>();
    const auto depth = r.pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < depth; ++i) {
        StackEntry e;
        e.level = r.pod<std::uint32_t>();
        e.sums = read_sums(r, times);
        p.stack.push_back(std::move(e));
    }
    const auto nh = r.pod<std::uint64_t>();
    if (nh != spec.histograms.size()) throw CheckpointError("checkpoint histogram layout does not match the spec");
    for (const auto& hs : spec.histograms) {
        PhaseSpaceHistogram h(hs.transform, hs.h, hs.half_extent);
        const auto total = r.pod<std::uint64_t>();
        const auto inside = r.pod<std::uint64_t>();
        const auto size = r.pod<std::uint64_t>();
        if (size != h.counts().size()) throw CheckpointError("checkpoint histogram size mismatch");
        r.raw(h.counts().data(), size * sizeof(std::uint64_t));
        h.set_totals(total, inside);
        p.histograms.push_back(std::move(h));
    }
    if (!r.done()) throw CheckpointError("checkpoint has trailing data");
    return p;
}

std::vector<std::uint64_t> sample_steps(const EnsembleSpec& spec) {
    std::vector<std::uint64_t> steps;
    steps.reserve(spec.sample_taus.size());
    for (double tau : spec.sample_taus) steps.push_back(static_cast<std::uint64_t>(std::llround(tau / spec.dtau)));
    return steps;
}

std::vector<PhaseSpaceHistogram> empty_histograms(const EnsembleSpec& spec) {
    std::vector<PhaseSpaceHistogram> out;
    for (const auto& h : spec.histograms) out.emplace_back(h.transform, h.h, h.half_extent);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------

void EnsembleSpec::validate() const {
    if (realizations < 1) throw DomainError("ensemble needs at least one realization");
    if (shard_size < 1) throw DomainError("shard size must be positive");
    if (!(dtau > 0.0)) throw DomainError("integration step must be positive");
    if (sample_taus.empty()) throw DomainError("ensemble needs at least one sample time");
    double prev = -1.0;
    for (double tau : sample_taus) {
        if (!(tau >= 0.0) || !(tau > prev)) throw DomainError("sample times must be non-negative and increasing");
        prev = tau;
    }
    for (const auto& h : histograms) {
        if (!(h.h > 0.0) || !(h.half_extent > 0.0)) throw DomainError("histogram bin and extent must be positive");
    }
    params.validate();
}

std::string EnsembleSpec::canonical() const {
    std::string out = fmt::format(
        "N={} seed={} tier={} Q1={} Q2={} noise={} ordering={} vacuum={} dtau={}\nparams {}\n", realizations,
        master_seed, tier_name(tier), Q1, Q2, noise, ordering, vacuum_initial, dtau, params.canonical());
    out += fmt::format("couplings d0={} g1={} g2={} g12={} g22={} gt={} Dp={}\n", couplings.delta_omega0,
                       couplings.g1, couplings.g2, couplings.g12, couplings.g22, couplings.gt,
                       couplings.Delta_prime);
    out += fmt::format("drive kind={} E={} E1={} E2={}\n", drive.kind == DriveSpec::Kind::TwoTone ? 2 : 1, drive.E,
                       drive.E1, drive.E2);
    out += "samples";
    for (double tau : sample_taus) out += fmt::format(" {}", tau);
    out += '\n';
    for (const auto& h : histograms) {
        out += fmt::format("histogram {} h={} extent={} T=", h.label, h.h, h.half_extent);
        for (Eigen::Index i = 0; i < h.transform.size(); ++i) out += fmt::format("{},", h.transform.data()[i]);
        out += '\n';
    }
    return out;
}

std::string EnsembleSpec::digest() const { return to_hex(sha256(canonical())); }

std::vector<Vec6> simulate_trajectory(const EnsembleSpec& spec, const DynamicsModel& model, std::uint64_t index) {
    SystemState s0;
    if (spec.vacuum_initial) {
        NoiseSource init(spec.master_seed, index | kInitialStreamBit);
        const double sd = std::sqrt(0.5);
        const double x = sd * init.normal();
        const double y = sd * init.normal();
        s0.q1 = sd * init.normal();
        s0.p1 = sd * init.normal();
        s0.q2 = sd * init.normal();
        s0.p2 = sd * init.normal();
        s0.a = cplx(x, y) / std::sqrt(2.0);
    }
    const auto steps = sample_steps(spec);
    std::vector<Vec6> out;
    out.reserve(steps.size());
    std::uint64_t call = 0;
    std::size_t next = 0;
    IntegratorOptions opts;
    opts.dtau = spec.dtau;
    opts.tau_end = static_cast<double>(steps.back()) * spec.dtau;
    opts.stride = 1;
    NoiseSpec noise{spec.noise, spec.master_seed, index};
    propagate(model, s0, noise, opts, [&](const SystemState& s) {
        while (next < steps.size() && steps[next] == call) {
            out.push_back(phase_space_vector(s));
            ++next;
        }
        ++call;
    });
    return out;
}

EnsembleResult run_ensemble(const EnsembleSpec& spec, unsigned workers, const RunControl& control) {
    const auto started = std::chrono::steady_clock::now();
    spec.validate();
    const std::string digest = spec.digest();
    const std::size_t times = spec.sample_taus.size();
    const DynamicsModel model(spec.params, spec.Q1, spec.Q2, spec.couplings, spec.drive, spec.tier, spec.ordering);

    const std::uint64_t blocks = (spec.realizations + kBlockSize - 1) / kBlockSize;
    const std::uint64_t shard_blocks = std::max<std::uint64_t>(1, (spec.shard_size + kBlockSize - 1) / kBlockSize);

    Progress progress;
    progress.histograms = empty_histograms(spec);
    if (control.resume && !control.checkpoint.empty() && std::filesystem::exists(control.checkpoint))
        progress = load_checkpoint(control.checkpoint, digest, spec);

    auto run_block = [&](std::uint64_t b) {
        BlockOutcome out;
        out.sums = MomentSums(times);
        out.histograms = empty_histograms(spec);
        const std::uint64_t first = b * kBlockSize;
        const std::uint64_t last = std::min<std::uint64_t>(spec.realizations, first + kBlockSize);
        for (std::uint64_t idx = first; idx < last; ++idx) {
            std::vector<Vec6> u;
            try {
                u = simulate_trajectory(spec, model, idx);
            } catch (const NonFiniteError&) {
                ++out.aborted;
                continue;
            } catch (const DomainError&) {
                ++out.aborted;
                continue;
            }
            out.sums.add(u);
            for (auto& h : out.histograms) {
                const Vec6& v = u.back();
                h.add({v(2), v(3), v(4), v(5)});
            }
        }
        return out;
    };

    std::uint64_t shards_done = 0;
    while (progress.next_block < blocks) {
        if (control.max_shards != 0 && shards_done >= control.max_shards) break;
        const std::uint64_t begin = progress.next_block;
        const std::uint64_t end = std::min(blocks, begin + shard_blocks);
        std::vector<BlockOutcome> outcomes(end - begin);
        parallel_for(outcomes.size(), workers, [&](std::size_t i) { outcomes[i] = run_block(begin + i); });
        for (auto& o : outcomes) {
            push_block(progress.stack, std::move(o.sums));
            progress.aborted += o.aborted;
            for (std::size_t k = 0; k < o.histograms.size(); ++k) progress.histograms[k].merge(o.histograms[k]);
        }
        progress.next_block = end;
        ++shards_done;
        if (!control.checkpoint.empty()) save_checkpoint(control.checkpoint, digest, progress);
    }

    EnsembleResult result;
    result.requested = spec.realizations;
    result.master_seed = spec.master_seed;
    result.spec_digest = digest;
    result.aborted = progress.aborted;
    result.complete = progress.next_block >= blocks;
    result.histograms = progress.histograms;

    const MomentSums total = fold_stack(progress.stack, times);
    result.realized = total.n;
    if (result.complete &&
        static_cast<double>(result.aborted) > kAbortLimit * static_cast<double>(spec.realizations))
        throw EnsembleAborted(fmt::format("{} of {} trajectories aborted (limit {}%)", result.aborted,
                                          spec.realizations, 100.0 * kAbortLimit));
    if (total.n >= 2) {
        const double wb = spec.params.omega_bar();
        for (std::size_t ti = 0; ti < times; ++ti) {
            std::array<double, 6> sum{};
            std::array<double, 21> cross{};
            const std::size_t base = ti * kTerms;
            for (std::size_t i = 0; i < 6; ++i) sum[i] = total.value(base + i);
            for (std::size_t k = 0; k < 21; ++k) cross[k] = total.value(base + 6 + k);
            CovarianceState c = moments_from_sums(static_cast<double>(total.n), sum, cross, spec.sample_taus[ti] / wb);
            try {
                result.En.push_back(logarithmic_negativity(c));
            } catch (const NonPhysicalError&) {
                // sampling noise can push a small ensemble across the bound
                result.En.push_back(std::numeric_limits<double>::quiet_NaN());
            }
            result.duan_plus.push_back(duan_sum(c, 1.0));
            result.duan_minus.push_back(duan_sum(c, -1.0));
            result.moments.push_back(std::move(c));
        }
    }
    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

}  // namespace twomem
