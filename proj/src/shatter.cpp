#include <algorithm>
#include <bit>
#include <optional>

#include "watershed/classifier.hpp"

namespace watershed {

namespace {

// Upper bound on placements examined in the bridge tier.
constexpr std::size_t kMaxBridgePlacements = 2'000'000;

struct Candidate {
    RowVector position;
    std::optional<std::size_t> target;  // set when the candidate is a target itself
};

void for_each_combination(std::size_t m, std::size_t r,
                          const std::function<bool(const std::vector<std::size_t>&)>& visit) {
    std::vector<std::size_t> pick(r);
    for (std::size_t i = 0; i < r; ++i) pick[i] = i;
    if (r > m) return;
    for (;;) {
        if (visit(pick)) return;
        std::size_t i = r;
        while (i > 0 && pick[i - 1] == m - r + i - 1) --i;
        if (i == 0) return;
        ++pick[i - 1];
        for (std::size_t j = i; j < r; ++j) pick[j] = pick[j - 1] + 1;
    }
}

std::size_t binomial(std::size_t m, std::size_t r) {
    if (r > m) return 0;
    std::size_t out = 1;
    for (std::size_t i = 1; i <= r; ++i) {
        out = out * (m - r + i) / i;
        if (out > kMaxBridgePlacements) return kMaxBridgePlacements + 1;
    }
    return out;
}

class PlacementSearch {
public:
    PlacementSearch(const Matrix& targets, std::span<const ClassLabel> config)
        : targets_(targets), config_(config.begin(), config.end()), k_(config.size()) {
        const Matrix dist = pairwise_distances(targets_);
        double diameter = 0.0;
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = i + 1; j < k_; ++j)
                diameter = std::max(diameter, dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        const RowVector centroid = targets_.colwise().mean();
        const double radius = 3.0 * diameter + 1.0;
        for (ClassLabel c = 0; c < 2; ++c) {
            RowVector far = centroid;
            far(0) += c == 0 ? radius : -radius;
            far_[c] = far;
        }
        distances_ = dist;
    }

    // Seeds: labelled targets plus extra (position, label) points. A class
    // with no seed at all receives its far-away auxiliary seed.
    std::optional<ShatterResult> attempt(const std::vector<ClassLabel>& target_seeds,
                                         const std::vector<std::pair<RowVector, ClassLabel>>& extras) const {
        std::vector<std::pair<RowVector, ClassLabel>> aux = extras;
        bool has[2] = {false, false};
        for (ClassLabel l : target_seeds)
            if (l >= 0) has[l] = true;
        for (const auto& e : aux) has[e.second] = true;
        for (ClassLabel c = 0; c < 2; ++c)
            if (!has[c]) aux.emplace_back(far_[c], c);

        ShatterResult r;
        r.points.resize(static_cast<Eigen::Index>(k_ + aux.size()), targets_.cols());
        r.points.topRows(static_cast<Eigen::Index>(k_)) = targets_;
        r.seed_labels = target_seeds;
        for (std::size_t a = 0; a < aux.size(); ++a) {
            r.points.row(static_cast<Eigen::Index>(k_ + a)) = aux[a].first;
            r.seed_labels.push_back(aux[a].second);
        }
        const PropagationResult prop = propagate(r.points, r.seed_labels, 2);
        for (std::size_t i = 0; i < k_; ++i)
            if (prop.labels[i] != config_[i]) return std::nullopt;
        r.found = true;
        r.seeds = prop.seeds;
        return r;
    }

    std::optional<ShatterResult> target_tier(std::size_t n_seeds) const {
        const std::size_t masks = std::size_t{1} << k_;
        for (std::size_t size = 0; size <= std::min(k_, 2 * n_seeds); ++size) {
            for (std::size_t mask = 0; mask < masks; ++mask) {
                if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
                std::vector<ClassLabel> seeds(k_, kUnlabeled);
                std::size_t count[2] = {0, 0};
                for (std::size_t i = 0; i < k_; ++i) {
                    if ((mask >> i) & 1U) {
                        seeds[i] = config_[i];
                        ++count[config_[i]];
                    }
                }
                if (count[0] > n_seeds || count[1] > n_seeds) continue;
                if (auto r = attempt(seeds, {})) return r;
            }
        }
        return std::nullopt;
    }

    std::optional<ShatterResult> bridge_tier(std::size_t n_seeds) const {
        // Per class: the list of admissible seed sets, each a list of candidates.
        std::vector<std::vector<Candidate>> pool(2);
        std::vector<std::vector<std::vector<std::size_t>>> choices(2);
        for (ClassLabel c = 0; c < 2; ++c) {
            std::vector<std::size_t> own;
            std::vector<std::size_t> other;
            for (std::size_t i = 0; i < k_; ++i) (config_[i] == c ? own : other).push_back(i);
            auto reach = [&](std::size_t i) {
                double r = std::numeric_limits<double>::infinity();
                for (std::size_t o : other) r = std::min(r, distances_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)));
                return r;
            };
            for (std::size_t i : own) pool[c].push_back({targets_.row(static_cast<Eigen::Index>(i)), i});
            if (own.size() <= n_seeds) {
                std::vector<std::size_t> all(own.size());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                choices[c].push_back(all);
                continue;
            }
            for (std::size_t a = 0; a < own.size(); ++a) {
                for (std::size_t b = a + 1; b < own.size(); ++b) {
                    const double ra = reach(own[a]);
                    const double rb = reach(own[b]);
                    const double t = std::isinf(ra) || std::isinf(rb) ? 0.5 : ra / (ra + rb);
                    const RowVector pa = targets_.row(static_cast<Eigen::Index>(own[a]));
                    const RowVector pb = targets_.row(static_cast<Eigen::Index>(own[b]));
                    pool[c].push_back({pa + t * (pb - pa), std::nullopt});
                }
            }
            if (binomial(pool[c].size(), n_seeds) > kMaxBridgePlacements) return std::nullopt;
            for_each_combination(pool[c].size(), n_seeds, [&](const std::vector<std::size_t>& pick) {
                choices[c].push_back(pick);
                return false;
            });
        }
        if (choices[0].size() * choices[1].size() > kMaxBridgePlacements) return std::nullopt;

        for (const auto& pick0 : choices[0]) {
            for (const auto& pick1 : choices[1]) {
                std::vector<ClassLabel> seeds(k_, kUnlabeled);
                std::vector<std::pair<RowVector, ClassLabel>> extras;
                for (ClassLabel c = 0; c < 2; ++c) {
                    for (std::size_t idx : (c == 0 ? pick0 : pick1)) {
                        const Candidate& cand = pool[c][idx];
                        if (cand.target) {
                            seeds[*cand.target] = c;
                        } else {
                            extras.emplace_back(cand.position, c);
                        }
                    }
                }
                if (auto r = attempt(seeds, extras)) return r;
            }
        }
        return std::nullopt;
    }

private:
    const Matrix& targets_;
    std::vector<ClassLabel> config_;
    std::size_t k_;
    Matrix distances_;
    RowVector far_[2];
};

}  // namespace

ShatterResult shatter_check(const Matrix& targets, std::size_t n_seeds,
                            std::span<const ClassLabel> config) {
    const auto k = static_cast<std::size_t>(targets.rows());
    if (config.size() != k) throw UsageError("shatter_check: configuration length does not match target count");
    if (k == 0) throw UsageError("shatter_check: need at least one target");
    if (k > 20) throw UsageError("shatter_check: at most 20 targets are supported");
    if (n_seeds == 0) throw UsageError("shatter_check: n_seeds must be positive");
    if (targets.cols() == 0) throw UsageError("shatter_check: zero-dimensional targets");
    for (ClassLabel l : config)
        if (l != 0 && l != 1) throw UsageError("shatter_check: configuration must be binary");

    PlacementSearch search(targets, config);
    if (auto r = search.target_tier(n_seeds)) return *r;
    if (auto r = search.bridge_tier(n_seeds)) return *r;
    ShatterResult none;
    none.points = targets;
    return none;
}

}  // namespace watershed
