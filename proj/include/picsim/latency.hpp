#pragma once

// Delay models for every segment of a server-to-meter round trip.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "picsim/sim.hpp"

namespace picsim {

using Seconds = double;

enum class LinkKind { Ethernet, WiFi, ThreeG, LocalBus };

std::string_view to_string(LinkKind kind);
std::optional<LinkKind> parse_link_kind(std::string_view text);

struct MixtureComponent {
    double weight = 1.0;
    Seconds location = 0.0;
    Seconds spread = 0.0;

    bool operator==(const MixtureComponent&) const = default;
};

/// Week-periodic multipliers on component locations, one per hour of the
/// week starting Sunday 00:00. Values lie in (0, 1].
class DiurnalProfile {
public:
    static constexpr std::size_t kHours = 168;

    DiurnalProfile();  // flat
    explicit DiurnalProfile(const std::array<double, kHours>& scale);

    static std::size_t hour_of_week(Seconds t);
    double at(Seconds t) const { return scale_[hour_of_week(t)]; }
    const std::array<double, kHours>& scale() const { return scale_; }
    bool is_flat() const;

    bool operator==(const DiurnalProfile&) const = default;

private:
    std::array<double, kHours> scale_;
};

/// Mixture of truncated normals on (0, hard_max]. A component with zero
/// spread is a point mass; a zero-location point mass models an ideal link
/// and yields exactly 0.
class LatencyModel {
public:
    /// Throws std::invalid_argument when weights are not positive or do not
    /// sum to 1 within 1e-9, or any location lies outside [0, hard_max].
    LatencyModel(LinkKind kind, std::vector<MixtureComponent> components, Seconds hard_max,
                 DiurnalProfile diurnal = {});

    static LatencyModel fixed(LinkKind kind, Seconds value);

    static LatencyModel default_ethernet();
    static LatencyModel default_wifi();
    static LatencyModel default_three_g();
    static LatencyModel default_local_bus();
    static LatencyModel default_metering();
    static LatencyModel default_for(LinkKind kind);

    LinkKind kind() const { return kind_; }
    const std::vector<MixtureComponent>& components() const { return components_; }
    Seconds hard_max() const { return hard_max_; }
    const DiurnalProfile& diurnal() const { return diurnal_; }
    bool deterministic() const;

    Seconds sample(sim::RandomStream& rng, Seconds at) const;
    /// Exact mean of the truncated mixture at the hour containing `at`.
    Seconds mean(Seconds at) const;
    /// Sum of weight * scaled location, ignoring truncation.
    Seconds nominal_mean(Seconds at) const;

    bool operator==(const LatencyModel&) const = default;

private:
    LinkKind kind_;
    std::vector<MixtureComponent> components_;
    Seconds hard_max_;
    DiurnalProfile diurnal_;
};

/// Scalar timing symbols used by the closed-form budget equations.
struct TimingBudget {
    Seconds t_server_cloud = 0.0;
    Seconds t_cloud = 0.0;
    Seconds t_ethernet = 0.0;
    Seconds t_wifi = 0.0;
    Seconds t_3g = 0.0;
    Seconds t_3g_uplink = 0.0;
    Seconds t_metering = 0.0;

    /// The uplink is taken as half of the 3G round trip.
    static TimingBudget make(Seconds t_3g, Seconds t_metering, Seconds t_ethernet = 0.0,
                             Seconds t_wifi = 0.0, Seconds t_server_cloud = 0.0,
                             Seconds t_cloud = 0.0);
    /// Throws std::invalid_argument on a negative field or an uplink that is
    /// not half of t_3g.
    void validate() const;

    bool operator==(const TimingBudget&) const = default;
};

/// Delay models for every link plus the fixed server-side terms.
/// `local_bus` is the PIC-to-meter hop; `metering` is the meter's power
/// reading time; `status_read` the time to report relay state.
struct NetworkModels {
    LatencyModel ethernet = LatencyModel::default_ethernet();
    LatencyModel wifi = LatencyModel::default_wifi();
    LatencyModel three_g = LatencyModel::default_three_g();
    LatencyModel local_bus = LatencyModel::default_local_bus();
    LatencyModel metering = LatencyModel::default_metering();
    LatencyModel status_read = LatencyModel::fixed(LinkKind::LocalBus, 0.0);
    Seconds t_server_cloud = 0.0;
    Seconds t_cloud = 0.0;

    const LatencyModel& link(LinkKind kind) const;

    /// Point-mass models reproducing a budget; local_bus takes t_ethernet.
    static NetworkModels fixed(const TimingBudget& budget);
    /// Budget at every model's hard maximum.
    TimingBudget worst_case() const;

    bool operator==(const NetworkModels&) const = default;
};

/// Server-to-station transit for one request/response pair, excluding the
/// meter: t_server_cloud + t_cloud + one draw of the link.
Seconds network_time(const NetworkModels& models, LinkKind link, sim::RandomStream& rng,
                     Seconds at);

/// One full retrieval round trip: network_time plus one metering draw. The
/// same stream feeds both draws.
Seconds round_trip_time(const NetworkModels& models, LinkKind link, sim::RandomStream& rng,
                        Seconds at);

struct Histogram {
    double low = 0.0;
    double high = 1.0;
    std::vector<std::uint64_t> counts;

    /// Throws std::invalid_argument for zero bins or an empty range.
    Histogram(double low, double high, std::size_t bins);

    double bin_width() const { return (high - low) / static_cast<double>(counts.size()); }
    double bin_low(std::size_t i) const { return low + bin_width() * static_cast<double>(i); }
    double bin_center(std::size_t i) const { return bin_low(i) + 0.5 * bin_width(); }
    std::uint64_t total() const;
    /// Values outside [low, high] are clamped into the edge bins.
    void add(double value);

    static Histogram of(std::span<const double> values, double low, double high,
                        std::size_t bins);
};

/// Histogram of n draws over [0, hard_max].
Histogram empirical_histogram(const LatencyModel& model, std::size_t n, std::size_t bins,
                              sim::RandomStream& rng, Seconds at = 0.0);

/// Peak locations of the Gaussian-smoothed histogram whose topographic
/// prominence is at least `min_prominence` times the tallest peak.
std::vector<double> detect_modes(const Histogram& hist, double smoothing_bins = 2.0,
                                 double min_prominence = 0.1);

struct ChiSquareResult {
    double statistic = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;
};

/// Two-sample chi-square homogeneity test over matching bins. Adjacent bins
/// are pooled until every expected count is at least 5.
ChiSquareResult chi_square_homogeneity(const Histogram& a, const Histogram& b);

void write_histogram_csv(std::ostream& out, const Histogram& hist);
void write_histogram_svg(std::ostream& out, const Histogram& hist, std::string_view title);

}  // namespace picsim
