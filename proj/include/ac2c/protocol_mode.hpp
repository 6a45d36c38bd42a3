#pragma once

#include <string>
#include <string_view>

namespace ac2c {

enum class ProtocolMode {
  AC2C,                // gated two-hop second round
  AC2C_NO_CONTROLLER,  // two-hop second round for every agent
  GNN_TWO_ROUND,       // second round repeats the one-hop exchange, ungated
  ONE_ROUND,           // no second round
};

std::string to_string(ProtocolMode mode);
// Accepts ac2c, ac2c_no_controller, gnn_two_round, one_round (case-insensitive).
ProtocolMode parse_protocol_mode(std::string_view text);

}  // namespace ac2c
