#pragma once

// Versioned checkpoint archive: a JSON header (configs, counters, vocabulary
// hashes) followed by raw parameter blobs, native endianness. Loading
// refuses vocabulary hash mismatches.

#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "graphtext/cycle.hpp"

namespace graphtext {

namespace ckpt {

constexpr char kMagic[8] = {'G', 'T', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

inline void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& out, uint32_t v) { write_bytes(out, &v, sizeof v); }

inline void read_bytes(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) fail(ErrorCode::BAD_CHECKPOINT, "truncated checkpoint");
}

inline uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  read_bytes(in, &v, sizeof v);
  return v;
}

inline void write_params(std::ostream& out, const ad::ParamSet& ps) {
  write_u32(out, static_cast<uint32_t>(ps.count()));
  for (const auto& p : ps.all()) {
    write_u32(out, static_cast<uint32_t>(p.name.size()));
    write_bytes(out, p.name.data(), p.name.size());
    write_u32(out, static_cast<uint32_t>(p.value.rows()));
    write_u32(out, static_cast<uint32_t>(p.value.cols()));
    for (const ad::Mat* m : {&p.value, &p.m, &p.v})
      write_bytes(out, m->data(), sizeof(double) * static_cast<size_t>(m->size()));
  }
}

inline void read_params(std::istream& in, ad::ParamSet& ps) {
  const uint32_t n = read_u32(in);
  if (n != ps.count()) fail(ErrorCode::BAD_CHECKPOINT, "parameter count mismatch");
  for (auto& p : ps.all()) {
    const uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    read_bytes(in, name.data(), name_len);
    if (name != p.name) fail(ErrorCode::BAD_CHECKPOINT, "parameter order mismatch at " + name);
    const uint32_t rows = read_u32(in);
    const uint32_t cols = read_u32(in);
    if (rows != p.value.rows() || cols != p.value.cols())
      fail(ErrorCode::BAD_CHECKPOINT, "parameter shape mismatch at " + name);
    for (ad::Mat* m : {&p.value, &p.m, &p.v})
      read_bytes(in, m->data(), sizeof(double) * static_cast<size_t>(m->size()));
  }
}

}  // namespace ckpt

inline ojson schedule_to_json(const ScheduleConfig& s) {
  return ojson{{"epochs", s.epochs},
               {"batch_size", s.batch_size},
               {"alternation", s.alternation == Alternation::PER_BATCH ? "per_batch" : "per_epoch"},
               {"lr_g2t", s.lr_g2t},
               {"lr_t2g", s.lr_t2g},
               {"max_length", s.decode.max_length}};
}

inline ScheduleConfig schedule_from_json(const ojson& j) {
  ScheduleConfig s;
  s.epochs = j.at("epochs").get<int>();
  s.batch_size = j.at("batch_size").get<int>();
  s.alternation = j.at("alternation").get<std::string>() == "per_epoch" ? Alternation::PER_EPOCH
                                                                        : Alternation::PER_BATCH;
  s.lr_g2t = j.at("lr_g2t").get<double>();
  s.lr_t2g = j.at("lr_t2g").get<double>();
  s.decode.max_length = j.at("max_length").get<int>();
  return s;
}

inline ojson models_to_json(const ModelConfig& m) {
  return ojson{{"g2t", ojson{{"embed_dim", m.g2t.embed_dim},
                             {"hidden", m.g2t.hidden},
                             {"layers", m.g2t.layers}}},
               {"t2g", ojson{{"embed_dim", m.t2g.embed_dim},
                             {"hidden", m.t2g.hidden},
                             {"layers", m.t2g.layers},
                             {"classifier_hidden", m.t2g.classifier_hidden}}}};
}

inline ModelConfig models_from_json(const ojson& j) {
  ModelConfig m;
  m.g2t.embed_dim = j.at("g2t").at("embed_dim").get<int>();
  m.g2t.hidden = j.at("g2t").at("hidden").get<int>();
  m.g2t.layers = j.at("g2t").at("layers").get<int>();
  m.t2g.embed_dim = j.at("t2g").at("embed_dim").get<int>();
  m.t2g.hidden = j.at("t2g").at("hidden").get<int>();
  m.t2g.layers = j.at("t2g").at("layers").get<int>();
  m.t2g.classifier_hidden = j.at("t2g").at("classifier_hidden").get<int>();
  return m;
}

inline void save_checkpoint(const std::string& path, const TrainState& st,
                            const ModelConfig& models) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IO_ERROR, "cannot write " + path);
  ckpt::write_bytes(out, ckpt::kMagic, sizeof ckpt::kMagic);
  ckpt::write_u32(out, ckpt::kVersion);

  std::ostringstream rng_state;
  rng_state << st.rng;
  ojson header{{"vocab_hash", st.vocab.hash()},
               {"relations_hash", st.relations.hash()},
               {"models", models_to_json(models)},
               {"schedule", schedule_to_json(st.schedule)},
               {"epoch", st.epoch},
               {"step", st.step},
               {"seed", st.seed},
               {"adam_g2t_steps", st.opt_g2t.steps()},
               {"adam_t2g_steps", st.opt_t2g.steps()},
               {"rng", rng_state.str()}};
  const std::string hs = header.dump();
  ckpt::write_u32(out, static_cast<uint32_t>(hs.size()));
  ckpt::write_bytes(out, hs.data(), hs.size());
  ckpt::write_params(out, st.g2t.params());
  ckpt::write_params(out, st.t2g.params());
  if (!out) fail(ErrorCode::IO_ERROR, "failed writing " + path);
}

struct LoadedCheckpoint {
  std::unique_ptr<TrainState> state;
  ModelConfig models;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path, const TokenVocab& vocab,
                                        const RelationVocab& relations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IO_ERROR, "cannot open " + path);
  char magic[8];
  ckpt::read_bytes(in, magic, sizeof magic);
  if (std::memcmp(magic, ckpt::kMagic, sizeof magic) != 0)
    fail(ErrorCode::BAD_CHECKPOINT, path + ": bad magic");
  if (ckpt::read_u32(in) != ckpt::kVersion)
    fail(ErrorCode::BAD_CHECKPOINT, path + ": unsupported version");
  const uint32_t hlen = ckpt::read_u32(in);
  std::string hs(hlen, '\0');
  ckpt::read_bytes(in, hs.data(), hlen);
  ojson header = ojson::parse(hs);

  if (header.at("vocab_hash").get<uint64_t>() != vocab.hash())
    fail(ErrorCode::BAD_CHECKPOINT, path + ": token vocabulary hash mismatch");
  if (header.at("relations_hash").get<uint64_t>() != relations.hash())
    fail(ErrorCode::BAD_CHECKPOINT, path + ": relation vocabulary hash mismatch");

  LoadedCheckpoint loaded;
  loaded.models = models_from_json(header.at("models"));
  loaded.state = std::make_unique<TrainState>(vocab, relations, loaded.models,
                                              schedule_from_json(header.at("schedule")),
                                              header.at("seed").get<uint64_t>());
  TrainState& st = *loaded.state;
  st.epoch = header.at("epoch").get<long>();
  st.step = header.at("step").get<long>();
  st.opt_g2t.set_steps(header.at("adam_g2t_steps").get<long>());
  st.opt_t2g.set_steps(header.at("adam_t2g_steps").get<long>());
  std::istringstream rng_state(header.at("rng").get<std::string>());
  rng_state >> st.rng;
  ckpt::read_params(in, st.g2t.params());
  ckpt::read_params(in, st.t2g.params());
  return loaded;
}

}  // namespace graphtext
