#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lhm {

using Vector = std::vector<double>;

// Posterior samples grouped by chain. Immutable after construction; samples
// are stored row-major in one contiguous block.
class Chains {
public:
    Chains() = default;

    std::size_t n_chains() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t dim() const { return dim_; }
    std::size_t n_samples() const { return log_posterior_.size(); }
    std::size_t chain_length(std::size_t chain) const { return offsets_.at(chain + 1) - offsets_[chain]; }

    // Row index of the first sample of `chain` in the flattened layout.
    std::size_t chain_begin(std::size_t chain) const { return offsets_.at(chain); }

    std::span<const double> sample(std::size_t row) const
    {
        return {data_.data() + row * dim_, dim_};
    }
    std::span<const double> sample(std::size_t chain, std::size_t i) const
    {
        return sample(offsets_.at(chain) + i);
    }
    double log_posterior(std::size_t row) const { return log_posterior_.at(row); }

    std::span<const double> flat_samples() const { return data_; }
    std::span<const double> log_posteriors() const { return log_posterior_; }

    std::vector<std::vector<Vector>> per_chain_samples() const;
    std::vector<std::vector<double>> per_chain_log_posterior() const;

    // New Chains holding the listed chains in the given order.
    Chains select(std::span<const std::size_t> chain_indices) const;

    friend Chains build_chains(const std::vector<std::vector<Vector>>& per_chain_samples,
                               const std::vector<std::vector<double>>& per_chain_logpost);
    friend Chains build_chains_flat(std::size_t dim, std::vector<std::size_t> chain_lengths,
                                    std::vector<double> data, std::vector<double> log_posterior);

private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<double> data_;
    std::vector<double> log_posterior_;
};

// Validates and packs per-chain samples. Throws DimensionError on ragged
// vectors or misaligned log-posterior lists, NonFiniteError on NaN/inf
// coordinates or non-finite log-posterior values.
Chains build_chains(const std::vector<std::vector<Vector>>& per_chain_samples,
                    const std::vector<std::vector<double>>& per_chain_logpost);

// Same validation, from an already flattened row-major block.
Chains build_chains_flat(std::size_t dim, std::vector<std::size_t> chain_lengths,
                         std::vector<double> data, std::vector<double> log_posterior);

struct ChainSplit {
    Chains training;
    Chains inference;
    std::vector<std::size_t> training_chains;
    std::vector<std::size_t> inference_chains;
};

// Random partition at chain granularity. With an odd number of chains the
// training half gets the extra one.
ChainSplit split_half(const Chains& chains, std::uint64_t seed);

// CSV interchange: chain_id,coord_0,...,coord_{D-1},log_posterior
void write_chains_csv(std::ostream& out, const Chains& chains);
void write_chains_csv(const std::string& path, const Chains& chains);
Chains read_chains_csv(std::istream& in);
Chains read_chains_csv(const std::string& path);

} // namespace lhm
