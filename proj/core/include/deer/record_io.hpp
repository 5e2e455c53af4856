#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "deer/controller.hpp"

namespace deer {

/**
 * Run records travel as line-delimited JSON, one record per question, with
 * the resolved controller configuration and tool version echoed into every
 * line so a run can be reproduced exactly from its output.
 */
std::string record_to_json(const RunRecord& record, const ControllerConfig& config);
RunRecord record_from_json(const std::string& line);

/// Parse the embedded configuration back out of a record line.
ControllerConfig config_from_record_json(const std::string& line);

void write_records(const std::filesystem::path& path,
                   const std::vector<RunRecord>& records,
                   const ControllerConfig& config);

std::vector<RunRecord> read_records(const std::filesystem::path& path);

/// Append one record line to an open stream (used for incremental flushing).
void append_record(std::ostream& out, const RunRecord& record,
                   const ControllerConfig& config);

}  // namespace deer
