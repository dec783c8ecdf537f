#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "relay/core/model.hpp"

// Wire format for orchestrator messages: CBOR (RFC 8949) of a compact,
// fixed-key document. Content bytes travel as CBOR byte strings, so arbitrary
// binary payloads cost no escaping. Layout:
//
//   { "t": {"id": str, "p": payload, "pt": uint},
//     "h": [[role, turn, slot, declared_size, tokens], ...],
//       slot := bytes (inline) | [bytes(16) object_id, uint size] (offloaded)
//     "c": {"k": 0 seq | 1 branch, "o": [roles], "i": uint, "d": bool, "r": role|null},
//     "x": null | [status, reason, score|null, tokens],
//     "s": seed, "n": rng_counter, "b": [max_turns, max_tokens] }

namespace relay {

namespace codec_detail {

inline void check_representable(const Json& v, const std::string& path) {
  switch (v.type()) {
    case Json::value_t::number_float:
      if (!std::isfinite(v.get<double>()))
        throw Error(Errc::encoding_failure, "non-finite number at " + path);
      break;
    case Json::value_t::discarded:
      throw Error(Errc::encoding_failure, "discarded value at " + path);
    case Json::value_t::object:
      for (auto it = v.begin(); it != v.end(); ++it) check_representable(*it, path + "." + it.key());
      break;
    case Json::value_t::array: {
      std::size_t i = 0;
      for (const auto& e : v) check_representable(e, path + "[" + std::to_string(i++) + "]");
      break;
    }
    default:
      break;
  }
}

inline Json::binary_t to_binary(const Bytes& b) {
  return Json::binary_t(std::vector<std::uint8_t>(b.begin(), b.end()));
}

inline Bytes from_binary(const Json& j) {
  const auto& bin = j.get_binary();
  return Bytes(bin.begin(), bin.end());
}

inline Json encode_object_id(const ObjectId& id) {
  std::vector<std::uint8_t> raw(16);
  for (int i = 0; i < 8; ++i) {
    raw[i] = static_cast<std::uint8_t>(id.hi >> (56 - 8 * i));
    raw[8 + i] = static_cast<std::uint8_t>(id.lo >> (56 - 8 * i));
  }
  return Json::binary(std::move(raw));
}

inline ObjectId decode_object_id(const Json& j) {
  const auto& raw = j.get_binary();
  if (raw.size() != 16) throw Error(Errc::encoding_failure, "object id must be 16 bytes");
  ObjectId id;
  for (int i = 0; i < 8; ++i) {
    id.hi = (id.hi << 8) | raw[i];
    id.lo = (id.lo << 8) | raw[8 + i];
  }
  return id;
}

inline Json encode_slot(const ContentSlot& slot) {
  if (slot.is_inline()) return Json::binary(std::vector<std::uint8_t>(slot.bytes().begin(), slot.bytes().end()));
  return Json::array({encode_object_id(slot.ref().object_id), slot.ref().size_bytes});
}

inline ContentSlot decode_slot(const Json& j) {
  if (j.is_binary()) return ContentSlot::inline_bytes(from_binary(j));
  if (j.is_array() && j.size() == 2)
    return ContentSlot::offloaded(decode_object_id(j.at(0)), j.at(1).get<std::uint64_t>());
  throw Error(Errc::encoding_failure, "malformed content slot");
}

}  // namespace codec_detail

inline Json to_document(const Orchestrator& orch) {
  using namespace codec_detail;
  check_representable(orch.task.payload, "payload");

  Json history = Json::array();
  for (const auto& e : orch.history)
    history.push_back(Json::array({e.author_role, e.turn_index, encode_slot(e.content),
                                   e.declared_size_bytes, e.token_count}));

  Json control = {{"k", orch.control.kind == ControlKind::sequential ? 0 : 1},
                  {"o", orch.control.order},
                  {"i", orch.control.index},
                  {"d", orch.control.is_done},
                  {"r", orch.control.next_role_override ? Json(*orch.control.next_role_override) : Json()}};

  Json outcome;
  if (orch.outcome) {
    const auto& o = *orch.outcome;
    if (o.score && !std::isfinite(*o.score)) throw Error(Errc::encoding_failure, "non-finite score");
    outcome = Json::array({static_cast<int>(o.status), o.reason, o.score ? Json(*o.score) : Json(),
                           o.tokens_generated});
  }

  return Json{{"t", {{"id", orch.task.task_id}, {"p", orch.task.payload}, {"pt", orch.task.partition_id}}},
              {"h", std::move(history)},
              {"c", std::move(control)},
              {"x", std::move(outcome)},
              {"s", orch.rng_seed},
              {"n", orch.rng_counter},
              {"b", Json::array({orch.budget.max_turns, orch.budget.max_tokens})}};
}

inline Orchestrator from_document(const Json& doc) {
  using namespace codec_detail;
  Orchestrator orch;
  const auto& t = doc.at("t");
  orch.task.task_id = t.at("id").get<std::string>();
  orch.task.payload = t.at("p");
  orch.task.partition_id = t.at("pt").get<std::uint32_t>();

  for (const auto& e : doc.at("h")) {
    HistoryEntry h;
    h.author_role = e.at(0).get<std::string>();
    h.turn_index = e.at(1).get<std::uint32_t>();
    h.content = decode_slot(e.at(2));
    h.declared_size_bytes = e.at(3).get<std::uint64_t>();
    h.token_count = e.at(4).get<std::uint64_t>();
    orch.history.push_back(std::move(h));
  }

  const auto& c = doc.at("c");
  orch.control.kind = c.at("k").get<int>() == 0 ? ControlKind::sequential : ControlKind::branching;
  orch.control.order = c.at("o").get<std::vector<std::string>>();
  orch.control.index = c.at("i").get<std::uint32_t>();
  orch.control.is_done = c.at("d").get<bool>();
  if (!c.at("r").is_null()) orch.control.next_role_override = c.at("r").get<std::string>();

  const auto& x = doc.at("x");
  if (!x.is_null()) {
    TaskOutcome o;
    int status = x.at(0).get<int>();
    if (status < 0 || status > 2) throw Error(Errc::encoding_failure, "bad outcome status");
    o.status = static_cast<OutcomeStatus>(status);
    o.reason = x.at(1).get<std::string>();
    if (!x.at(2).is_null()) o.score = x.at(2).get<double>();
    o.tokens_generated = x.at(3).get<std::uint64_t>();
    orch.outcome = std::move(o);
  }

  orch.rng_seed = doc.at("s").get<std::uint64_t>();
  orch.rng_counter = doc.at("n").get<std::uint64_t>();
  orch.budget.max_turns = doc.at("b").at(0).get<std::uint32_t>();
  orch.budget.max_tokens = doc.at("b").at(1).get<std::uint64_t>();
  return orch;
}

/// Deterministic encoding; `size()` of the result is what the metrics count as
/// mailbox bytes.
inline Bytes serialize_orchestrator(const Orchestrator& orch) {
  Json doc = to_document(orch);
  std::vector<std::uint8_t> out;
  try {
    Json::to_cbor(doc, out);
  } catch (const Json::exception& e) {
    throw Error(Errc::encoding_failure, e.what());
  }
  return Bytes(out.begin(), out.end());
}

inline Orchestrator deserialize_orchestrator(std::string_view bytes) {
  try {
    return from_document(Json::from_cbor(bytes.begin(), bytes.end()));
  } catch (const Json::exception& e) {
    throw Error(Errc::encoding_failure, e.what());
  }
}

}  // namespace relay
