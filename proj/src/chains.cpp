#include "lhm/chains.hpp"

#include "lhm/errors.hpp"
#include "lhm/random.hpp"
#include "text_format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace lhm {

namespace {

void check_finite_rows(std::size_t dim, std::span<const double> data, std::span<const double> log_post)
{
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw NonFiniteError("sample " + std::to_string(i / dim) + " has a non-finite coordinate");
        }
    }
    for (std::size_t i = 0; i < log_post.size(); ++i) {
        if (!std::isfinite(log_post[i])) {
            throw NonFiniteError("sample " + std::to_string(i) + " has a non-finite log posterior");
        }
    }
}

} // namespace

std::vector<std::vector<Vector>> Chains::per_chain_samples() const
{
    std::vector<std::vector<Vector>> out(n_chains());
    for (std::size_t c = 0; c < n_chains(); ++c) {
        out[c].reserve(chain_length(c));
        for (std::size_t i = 0; i < chain_length(c); ++i) {
            auto s = sample(c, i);
            out[c].emplace_back(s.begin(), s.end());
        }
    }
    return out;
}

std::vector<std::vector<double>> Chains::per_chain_log_posterior() const
{
    std::vector<std::vector<double>> out(n_chains());
    for (std::size_t c = 0; c < n_chains(); ++c) {
        out[c].assign(log_posterior_.begin() + static_cast<std::ptrdiff_t>(offsets_[c]),
                      log_posterior_.begin() + static_cast<std::ptrdiff_t>(offsets_[c + 1]));
    }
    return out;
}

Chains Chains::select(std::span<const std::size_t> chain_indices) const
{
    Chains out;
    out.dim_ = dim_;
    out.offsets_.push_back(0);
    for (std::size_t c : chain_indices) {
        if (c >= n_chains()) {
            throw DimensionError("chain index out of range");
        }
        const auto b = offsets_[c];
        const auto e = offsets_[c + 1];
        out.data_.insert(out.data_.end(), data_.begin() + static_cast<std::ptrdiff_t>(b * dim_),
                         data_.begin() + static_cast<std::ptrdiff_t>(e * dim_));
        out.log_posterior_.insert(out.log_posterior_.end(), log_posterior_.begin() + static_cast<std::ptrdiff_t>(b),
                                  log_posterior_.begin() + static_cast<std::ptrdiff_t>(e));
        out.offsets_.push_back(out.log_posterior_.size());
    }
    return out;
}

Chains build_chains(const std::vector<std::vector<Vector>>& per_chain_samples,
                    const std::vector<std::vector<double>>& per_chain_logpost)
{
    if (per_chain_samples.empty()) {
        throw DimensionError("at least one chain is required");
    }
    if (per_chain_logpost.size() != per_chain_samples.size()) {
        throw DimensionError("log-posterior list has " + std::to_string(per_chain_logpost.size()) +
                             " chains, samples have " + std::to_string(per_chain_samples.size()));
    }
    std::size_t dim = 0;
    for (const auto& chain : per_chain_samples) {
        if (!chain.empty()) {
            dim = chain.front().size();
            break;
        }
    }
    if (dim == 0) {
        throw DimensionError("chains contain no samples of positive dimension");
    }

    std::vector<std::size_t> lengths;
    std::vector<double> data;
    std::vector<double> log_post;
    for (std::size_t c = 0; c < per_chain_samples.size(); ++c) {
        const auto& chain = per_chain_samples[c];
        if (per_chain_logpost[c].size() != chain.size()) {
            throw DimensionError("chain " + std::to_string(c) + ": " + std::to_string(chain.size()) + " samples but " +
                                 std::to_string(per_chain_logpost[c].size()) + " log-posterior values");
        }
        for (const auto& s : chain) {
            if (s.size() != dim) {
                throw DimensionError("chain " + std::to_string(c) + ": sample of dimension " +
                                     std::to_string(s.size()) + ", expected " + std::to_string(dim));
            }
            data.insert(data.end(), s.begin(), s.end());
        }
        log_post.insert(log_post.end(), per_chain_logpost[c].begin(), per_chain_logpost[c].end());
        lengths.push_back(chain.size());
    }
    return build_chains_flat(dim, std::move(lengths), std::move(data), std::move(log_post));
}

Chains build_chains_flat(std::size_t dim, std::vector<std::size_t> chain_lengths, std::vector<double> data,
                         std::vector<double> log_posterior)
{
    if (chain_lengths.empty()) {
        throw DimensionError("at least one chain is required");
    }
    if (dim == 0) {
        throw DimensionError("dimension must be positive");
    }
    const std::size_t total = std::accumulate(chain_lengths.begin(), chain_lengths.end(), std::size_t{0});
    if (data.size() != total * dim) {
        throw DimensionError("sample block size does not match chain lengths and dimension");
    }
    if (log_posterior.size() != total) {
        throw DimensionError("log-posterior count does not match sample count");
    }
    check_finite_rows(dim, data, log_posterior);

    Chains out;
    out.dim_ = dim;
    out.offsets_.reserve(chain_lengths.size() + 1);
    out.offsets_.push_back(0);
    for (auto n : chain_lengths) {
        out.offsets_.push_back(out.offsets_.back() + n);
    }
    out.data_ = std::move(data);
    out.log_posterior_ = std::move(log_posterior);
    return out;
}

ChainSplit split_half(const Chains& chains, std::uint64_t seed)
{
    const std::size_t n = chains.n_chains();
    if (n < 2) {
        throw DimensionError("split_half needs at least two chains, got " + std::to_string(n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, 0x5117);
    // Fisher-Yates with our own uniform draw so the permutation does not
    // depend on the standard library's shuffle implementation.
    for (std::size_t i = n - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
        std::swap(order[i], order[std::min(j, i)]);
    }
    const std::size_t n_train = (n + 1) / 2;
    ChainSplit split;
    split.training_chains.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.inference_chains.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(split.training_chains.begin(), split.training_chains.end());
    std::sort(split.inference_chains.begin(), split.inference_chains.end());
    split.training = chains.select(split.training_chains);
    split.inference = chains.select(split.inference_chains);
    return split;
}

void write_chains_csv(std::ostream& out, const Chains& chains)
{
    out << "chain_id";
    for (std::size_t j = 0; j < chains.dim(); ++j) {
        out << ",coord_" << j;
    }
    out << ",log_posterior\n";
    for (std::size_t c = 0; c < chains.n_chains(); ++c) {
        for (std::size_t i = 0; i < chains.chain_length(c); ++i) {
            out << c;
            for (double v : chains.sample(c, i)) {
                out << ',' << format_double(v);
            }
            out << ',' << format_double(chains.log_posterior(chains.chain_begin(c) + i)) << '\n';
        }
    }
}

void write_chains_csv(const std::string& path, const Chains& chains)
{
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open " + path + " for writing");
    }
    write_chains_csv(out, chains);
}

Chains read_chains_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("chains CSV is empty");
    }
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header.front() != "chain_id" || header.back() != "log_posterior") {
        throw DataError("chains CSV header must be chain_id,coord_0..coord_{D-1},log_posterior");
    }
    const std::size_t dim = header.size() - 2;
    for (std::size_t j = 0; j < dim; ++j) {
        if (header[j + 1] != "coord_" + std::to_string(j)) {
            throw DataError("unexpected column '" + std::string(header[j + 1]) + "'");
        }
    }

    // chain ids are grouped in order of first appearance
    std::map<long long, std::size_t> id_to_index;
    std::vector<std::vector<Vector>> samples;
    std::vector<std::vector<double>> log_post;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
        }
        const auto id = static_cast<long long>(parse_double(fields[0], line_no));
        auto [it, inserted] = id_to_index.try_emplace(id, samples.size());
        if (inserted) {
            samples.emplace_back();
            log_post.emplace_back();
        }
        Vector v(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            v[j] = parse_double(fields[j + 1], line_no);
        }
        samples[it->second].push_back(std::move(v));
        log_post[it->second].push_back(parse_double(fields.back(), line_no));
    }
    return build_chains(samples, log_post);
}

Chains read_chains_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    return read_chains_csv(in);
}

} // namespace lhm
