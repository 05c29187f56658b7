#include "picsim/trace_io.hpp"

#include <istream>
#include <ostream>

namespace picsim::sim {

namespace {
constexpr const char* kFormat = "picsim-trace";
constexpr int kVersion = 1;
}  // namespace

void write_trace(std::ostream& out, const EventTrace& trace, const nlohmann::json& header) {
    nlohmann::json head = header;
    head["type"] = "header";
    head["format"] = kFormat;
    head["version"] = kVersion;
    head["seed"] = trace.seed;
    head["config_digest"] = trace.config_digest;
    out << head.dump() << '\n';
    for (const auto& r : trace.records) {
        nlohmann::json j{{"type", "event"},
                         {"at", r.at},
                         {"seq", r.seq},
                         {"kind", to_string(r.kind)},
                         {"label", r.label},
                         {"data", r.data}};
        out << j.dump() << '\n';
    }
    nlohmann::json foot{{"type", "footer"},
                        {"digest", trace.digest_hex()},
                        {"failed", trace.failed},
                        {"failure", trace.failure},
                        {"records", trace.records.size()}};
    out << foot.dump() << '\n';
}

TraceFile read_trace(std::istream& in) {
    TraceFile file;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    bool have_footer = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (have_footer) throw TraceParseError(lineno, "content after footer");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw TraceParseError(lineno, std::string("malformed JSON: ") + e.what());
        }
        try {
            const std::string type = j.at("type").get<std::string>();
            if (!have_header) {
                if (type != "header") throw TraceParseError(lineno, "expected header record");
                if (j.at("format").get<std::string>() != kFormat) {
                    throw TraceParseError(lineno, "not a picsim trace");
                }
                if (j.at("version").get<int>() != kVersion) {
                    throw TraceParseError(lineno, "unsupported trace version");
                }
                file.trace.seed = j.at("seed").get<std::uint64_t>();
                file.trace.config_digest = j.at("config_digest").get<std::string>();
                file.header = std::move(j);
                have_header = true;
            } else if (type == "event") {
                TraceRecord r;
                r.at = j.at("at").get<double>();
                r.seq = j.at("seq").get<std::uint64_t>();
                r.kind = parse_event_kind(j.at("kind").get<std::string>());
                r.label = j.at("label").get<std::string>();
                r.data = j.at("data");
                file.trace.records.push_back(std::move(r));
            } else if (type == "footer") {
                file.recorded_digest = j.at("digest").get<std::string>();
                file.trace.failed = j.at("failed").get<bool>();
                file.trace.failure = j.at("failure").get<std::string>();
                have_footer = true;
            } else {
                throw TraceParseError(lineno, "unknown record type '" + type + "'");
            }
        } catch (const TraceParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw TraceParseError(lineno, e.what());
        }
    }
    if (!have_header) throw TraceParseError(lineno, "empty trace");
    if (!have_footer) throw TraceParseError(lineno, "missing footer (truncated trace)");
    return file;
}

}  // namespace picsim::sim
