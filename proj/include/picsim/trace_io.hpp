#pragma once

// Line-delimited JSON trace files: a header record, one record per executed
// event, and a footer carrying the digest.

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "picsim/sim.hpp"

namespace picsim::sim {

class TraceParseError : public std::runtime_error {
public:
    TraceParseError(std::size_t line, const std::string& what)
        : std::runtime_error("trace line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct TraceFile {
    nlohmann::json header;  // includes "command" and "config" for replay
    EventTrace trace;
    std::string recorded_digest;
};

/// `header` is copied into the header record; seed, config digest and format
/// fields are filled in from `trace`.
void write_trace(std::ostream& out, const EventTrace& trace, const nlohmann::json& header);
TraceFile read_trace(std::istream& in);

}  // namespace picsim::sim
