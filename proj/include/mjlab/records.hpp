#pragma once

#include <json.hpp>

#include "mjlab/fault_model.hpp"
#include "mjlab/game.hpp"
#include "mjlab/policy.hpp"

namespace mjlab {

// Structured record conversions shared by logs, transcripts and reports.
nlohmann::json action_to_json(const Action& a);
Action action_from_json(const nlohmann::json& j);

nlohmann::json fault_event_to_json(const FaultEvent& f);
FaultEvent fault_event_from_json(const nlohmann::json& j);

nlohmann::json trace_to_json(const DecisionTrace& t);

nlohmann::json params_to_json(const PolicyParams& p);
PolicyParams params_from_json(const nlohmann::json& j);

}  // namespace mjlab
