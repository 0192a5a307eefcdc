// corpus.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dstruct/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dstruct/error.hpp"
#include "dstruct/rng.hpp"
#include "json.hpp"

namespace dstruct {

using ojson = nlohmann::ordered_json;

std::string UtterancePair::text() const {
  if (system_text.empty()) return user_text;
  if (user_text.empty()) return system_text;
  return system_text + " " + user_text;
}

std::vector<std::size_t> Dialogue::gold_states() const {
  std::vector<std::size_t> out;
  out.reserve(pairs.size());
  for (const UtterancePair& p : pairs) {
    if (!p.gold_state) throw InputError("dialogue '" + id + "' has no gold states");
    out.push_back(*p.gold_state);
  }
  return out;
}

void Dialogue::validate() const {
  if (pairs.empty()) throw InputError("dialogue '" + id + "' has no turns");
  const bool first = pairs.front().gold_state.has_value();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].system_text.empty() && pairs[i].user_text.empty())
      throw InputError("dialogue '" + id + "' turn " + std::to_string(i) +
                       ": both texts are empty");
    if (pairs[i].gold_state.has_value() != first)
      throw InputError("dialogue '" + id + "': state labels present on some turns only");
  }
}

bool corpus_labeled(const Corpus& corpus) {
  if (corpus.empty()) return false;
  for (const Dialogue& d : corpus)
    if (!d.labeled()) return false;
  return true;
}

std::size_t count_pairs(const Corpus& corpus) {
  std::size_t n = 0;
  for (const Dialogue& d : corpus) n += d.pairs.size();
  return n;
}

std::vector<std::string> corpus_utterances(const Corpus& corpus) {
  std::vector<std::string> out;
  for (const Dialogue& d : corpus)
    for (const UtterancePair& p : d.pairs) {
      if (!p.system_text.empty()) out.push_back(p.system_text);
      if (!p.user_text.empty()) out.push_back(p.user_text);
    }
  return out;
}

std::vector<std::vector<std::size_t>> corpus_gold_sequences(const Corpus& corpus) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(corpus.size());
  for (const Dialogue& d : corpus) out.push_back(d.gold_states());
  return out;
}

// ---- corpus JSON -------------------------------------------------------------

namespace {

std::string field_string(const ojson& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field \"" + key + "\"");
  if (!it->is_string()) throw ParseError(where + ": field \"" + key + "\" must be a string");
  return it->get<std::string>();
}

}  // namespace

Corpus parse_corpus(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("corpus: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("corpus: top level must be an array of dialogues");
  Corpus corpus;
  corpus.reserve(doc.size());
  for (std::size_t di = 0; di < doc.size(); ++di) {
    const ojson& rec = doc[di];
    const std::string pos = "dialogue #" + std::to_string(di);
    if (!rec.is_object()) throw ParseError(pos + ": must be an object");
    Dialogue d;
    d.id = field_string(rec, "id", pos);
    const std::string where = "dialogue '" + d.id + "'";
    auto turns = rec.find("turns");
    if (turns == rec.end()) throw ParseError(where + ": missing field \"turns\"");
    if (!turns->is_array()) throw ParseError(where + ": field \"turns\" must be an array");
    for (std::size_t ti = 0; ti < turns->size(); ++ti) {
      const ojson& t = (*turns)[ti];
      const std::string tw = where + " turn " + std::to_string(ti);
      if (!t.is_object()) throw ParseError(tw + ": must be an object");
      UtterancePair p;
      p.system_text = field_string(t, "sys", tw);
      p.user_text = field_string(t, "usr", tw);
      auto st = t.find("state");
      if (st != t.end() && !st->is_null()) {
        if (!st->is_number_integer() || st->get<long long>() < 0)
          throw ParseError(tw + ": field \"state\" must be a non-negative integer or null");
        p.gold_state = st->get<std::size_t>();
      }
      d.pairs.push_back(std::move(p));
    }
    try {
      d.validate();
    } catch (const InputError& e) {
      throw ParseError(e.what());
    }
    corpus.push_back(std::move(d));
  }
  return corpus;
}

std::string corpus_to_json(const Corpus& corpus) {
  ojson doc = ojson::array();
  for (const Dialogue& d : corpus) {
    ojson turns = ojson::array();
    for (const UtterancePair& p : d.pairs) {
      ojson t;
      t["sys"] = p.system_text;
      t["usr"] = p.user_text;
      t["state"] = p.gold_state ? ojson(*p.gold_state) : ojson(nullptr);
      turns.push_back(std::move(t));
    }
    ojson rec;
    rec["id"] = d.id;
    rec["turns"] = std::move(turns);
    doc.push_back(std::move(rec));
  }
  return doc.dump(1) + "\n";
}

namespace {

std::string read_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(std::string("cannot read ") + what + " " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text, const char* what) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(std::string("cannot write ") + what + " " + path.string());
  out << text;
  if (!out) throw IoError(std::string("failed writing ") + what + " " + path.string());
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_file(path, "corpus"));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, corpus_to_json(corpus), "corpus");
}

// ---- structures ----------------------------------------------------------------

bool GroundTruthStructure::is_absorbing(std::size_t state) const {
  return trans.at(state).at(state) == 1.0;
}

bool GroundTruthStructure::has_absorbing() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (is_absorbing(i)) return true;
  return false;
}

void GroundTruthStructure::validate() const {
  const std::size_t n = states.size();
  if (n == 0) throw InputError("structure: no states");
  auto check_row = [](const std::vector<double>& row, const std::string& what) {
    double s = 0.0;
    for (double x : row) {
      if (!(x >= 0.0)) throw InputError(what + ": negative or NaN probability");
      s += x;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw InputError(what + ": sums to " + std::to_string(s));
  };
  if (init.size() != n) throw InputError("structure: init has wrong length");
  check_row(init, "structure init");
  if (trans.size() != n) throw InputError("structure: trans has wrong row count");
  for (std::size_t i = 0; i < n; ++i) {
    if (trans[i].size() != n)
      throw InputError("structure: trans row " + std::to_string(i) + " has wrong length");
    check_row(trans[i], "structure trans row " + std::to_string(i));
  }
  if (templates.size() != n) throw InputError("structure: templates has wrong length");
  for (std::size_t i = 0; i < n; ++i)
    if (templates[i].system.empty() && templates[i].user.empty())
      throw InputError("structure: state '" + states[i] + "' has no templates");
}

GroundTruthStructure parse_structure(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("structure: invalid JSON: ") + e.what());
  }
  GroundTruthStructure s;
  try {
    s.states = doc.at("states").get<std::vector<std::string>>();
    s.init = doc.at("init").get<std::vector<double>>();
    s.trans = doc.at("trans").get<std::vector<std::vector<double>>>();
    for (const auto& t : doc.at("templates")) {
      StateTemplates st;
      if (t.contains("sys")) st.system = t.at("sys").get<std::vector<std::string>>();
      if (t.contains("usr")) st.user = t.at("usr").get<std::vector<std::string>>();
      s.templates.push_back(std::move(st));
    }
    if (doc.contains("slots"))
      s.slots = doc.at("slots").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("structure: ") + e.what());
  }
  try {
    s.validate();
  } catch (const InputError& e) {
    throw ParseError(e.what());
  }
  return s;
}

std::string structure_to_json(const GroundTruthStructure& structure) {
  ojson doc;
  doc["states"] = structure.states;
  doc["init"] = structure.init;
  doc["trans"] = structure.trans;
  ojson templates = ojson::array();
  for (const StateTemplates& t : structure.templates)
    templates.push_back(ojson{{"sys", t.system}, {"usr", t.user}});
  doc["templates"] = std::move(templates);
  doc["slots"] = structure.slots;
  return doc.dump(1) + "\n";
}

GroundTruthStructure load_structure(const std::filesystem::path& path) {
  return parse_structure(read_file(path, "structure"));
}

// ---- generator -------------------------------------------------------------------

namespace {

std::string fill_template(const std::string& tmpl,
                          const std::map<std::string, std::vector<std::string>>& slots,
                          RngState& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const std::size_t close = tmpl.find('}', i);
      if (close != std::string::npos) {
        const std::string name = tmpl.substr(i + 1, close - i - 1);
        auto it = slots.find(name);
        if (it == slots.end() || it->second.empty())
          throw InputError("template references unknown slot {" + name + "}");
        out += it->second[rng.uniform_index(it->second.size())];
        i = close + 1;
        continue;
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

std::string pick(const std::vector<std::string>& options,
                 const std::map<std::string, std::vector<std::string>>& slots, RngState& rng) {
  if (options.empty()) return {};
  return fill_template(options[rng.uniform_index(options.size())], slots, rng);
}

std::string dialogue_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "dlg-%05zu", i);
  return buf;
}

}  // namespace

Corpus generate_synthetic(const GroundTruthStructure& structure, std::size_t n_dialogues,
                          std::size_t min_turns, std::optional<std::size_t> max_turns,
                          RngState& rng) {
  structure.validate();
  if (min_turns < 1) throw ParameterError("generate: min_turns must be at least 1");
  if (max_turns && *max_turns < min_turns)
    throw ParameterError("generate: max_turns must be >= min_turns");
  if (!max_turns && !structure.has_absorbing())
    throw ParameterError("generate: unbounded walks need an absorbing state");

  constexpr std::size_t kMaxAttempts = 10000;
  Corpus corpus;
  corpus.reserve(n_dialogues);
  for (std::size_t d = 0; d < n_dialogues; ++d) {
    Dialogue dlg;
    dlg.id = dialogue_id(d);
    for (std::size_t attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts)
        throw ParameterError("generate: no walk reached min_turns=" + std::to_string(min_turns) +
                             " in " + std::to_string(kMaxAttempts) + " attempts");
      dlg.pairs.clear();
      std::size_t state = rng.categorical(structure.init);
      while (true) {
        const StateTemplates& t = structure.templates[state];
        UtterancePair p;
        p.system_text = pick(t.system, structure.slots, rng);
        p.user_text = pick(t.user, structure.slots, rng);
        p.gold_state = state;
        dlg.pairs.push_back(std::move(p));
        if (structure.is_absorbing(state)) break;
        if (max_turns && dlg.pairs.size() >= *max_turns) break;
        state = rng.categorical(structure.trans[state]);
      }
      if (dlg.pairs.size() >= min_turns) break;
    }
    corpus.push_back(std::move(dlg));
  }
  return corpus;
}

// ---- built-in structures ---------------------------------------------------------

GroundTruthStructure chain_structure(std::size_t k) {
  static const char* const kWords[] = {"alpha", "bravo", "charlie", "delta", "echo",
                                       "foxtrot", "golf", "hotel", "india", "juliet",
                                       "kilo", "lima", "mike", "november", "oscar", "papa"};
  constexpr std::size_t kNumWords = sizeof(kWords) / sizeof(kWords[0]);
  if (k < 2) throw ParameterError("chain structure needs at least 2 states");
  GroundTruthStructure s;
  for (std::size_t i = 0; i < k; ++i) {
    std::string w = kWords[i % kNumWords];
    if (i >= kNumWords) w += std::to_string(i / kNumWords);
    s.states.push_back("step_" + w);
    s.init.push_back(1.0 / static_cast<double>(k));
    std::vector<double> row(k, 0.0);
    row[(i + 1) % k] = 1.0;
    s.trans.push_back(std::move(row));
    s.templates.push_back({{"please confirm code " + w + " now ."}, {"code " + w + " confirmed ."}});
  }
  return s;
}

namespace {

GroundTruthStructure bus_structure() {
  GroundTruthStructure s;
  s.states = {"greet_ask_loc", "ask_time", "query_kb_return",
              "inform_result", "anything_else", "goodbye"};
  s.init = {1, 0, 0, 0, 0, 0};
  s.trans = {
      {0.2, 0.8, 0.0, 0.0, 0.0, 0.0},  //
      {0.0, 0.2, 0.8, 0.0, 0.0, 0.0},  //
      {0.0, 0.0, 0.0, 1.0, 0.0, 0.0},  //
      {0.0, 0.0, 0.0, 0.0, 1.0, 0.0},  //
      {0.4, 0.0, 0.0, 0.0, 0.0, 0.6},  //
      {0.0, 0.0, 0.0, 0.0, 0.0, 1.0},
  };
  s.templates = {
      {{"hello , where are you leaving from ?", "hi , which stop do you depart from ?"},
       {"i am leaving from {loc} .", "from {loc} please .", "{loc} ."}},
      {{"what time do you want to leave ?", "when would you like to travel ?"},
       {"at {time} .", "i want to leave at {time} .", "{time} please ."}},
      {{"QUERY loc={loc} time={time}"}, {"RET bus={bus} wait={wait}"}},
      {{"bus {bus} will arrive in {wait} minutes .", "the next bus is {bus} in {wait} minutes ."},
       {"thank you .", "great , thanks ."}},
      {{"is there anything else i can help with ?", "anything else ?"},
       {"let me think .", "hmm , maybe ."}},
      {{"goodbye , have a nice trip .", "bye , thanks for riding with us ."},
       {"bye .", "goodbye ."}},
  };
  s.slots = {
      {"loc", {"penn", "cmu", "downtown", "airport", "forbes", "oakland"}},
      {"time", {"now", "noon", "midnight", "7 am", "5 pm", "9 pm"}},
      {"bus", {"61a", "61b", "28x", "54c", "p1"}},
      {"wait", {"5", "10", "15", "20", "30"}},
  };
  return s;
}

GroundTruthStructure weather_structure() {
  GroundTruthStructure s;
  s.states = {"greet_ask_loc", "ask_date", "query_kb_return",
              "inform_weather", "anything_else", "goodbye"};
  s.init = {1, 0, 0, 0, 0, 0};
  s.trans = {
      {0.2, 0.8, 0.0, 0.0, 0.0, 0.0},  //
      {0.0, 0.2, 0.8, 0.0, 0.0, 0.0},  //
      {0.0, 0.0, 0.0, 1.0, 0.0, 0.0},  //
      {0.0, 0.0, 0.0, 0.0, 1.0, 0.0},  //
      {0.3, 0.0, 0.0, 0.0, 0.0, 0.7},  //
      {0.0, 0.0, 0.0, 0.0, 0.0, 1.0},
  };
  s.templates = {
      {{"hello , which city are you interested in ?", "hi , where do you want the forecast for ?"},
       {"{city} .", "the weather in {city} please .", "i am in {city} ."}},
      {{"which day do you mean ?", "for what date ?"},
       {"{date} .", "for {date} please .", "i mean {date} ."}},
      {{"QUERY city={city} date={date}"}, {"RET sky={sky} temp={temp}"}},
      {{"it will be {sky} with {temp} degrees .", "expect {sky} skies , around {temp} degrees ."},
       {"thanks .", "good to know ."}},
      {{"do you need anything else ?", "anything else ?"}, {"let me think .", "hmm , maybe ."}},
      {{"goodbye , stay dry .", "bye , enjoy your day ."}, {"bye .", "see you ."}},
  };
  s.slots = {
      {"city", {"pittsburgh", "boston", "seattle", "denver", "austin"}},
      {"date", {"today", "tomorrow", "monday", "friday", "the weekend"}},
      {"sky", {"sunny", "rainy", "cloudy", "windy", "snowy"}},
      {"temp", {"10", "20", "30", "40", "70"}},
  };
  return s;
}

}  // namespace

std::map<std::string, GroundTruthStructure> default_structures() {
  std::map<std::string, GroundTruthStructure> out;
  out.emplace("bus", bus_structure());
  out.emplace("weather", weather_structure());
  for (std::size_t k = 2; k <= 8; ++k) out.emplace("chain-" + std::to_string(k), chain_structure(k));
  return out;
}

std::optional<GroundTruthStructure> find_structure(const std::string& name) {
  if (name == "bus") return bus_structure();
  if (name == "weather") return weather_structure();
  if (name.rfind("chain-", 0) == 0) {
    const std::string num = name.substr(6);
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos ||
        num.size() > 4)
      return std::nullopt;
    const std::size_t k = std::stoul(num);
    if (k < 2) return std::nullopt;
    return chain_structure(k);
  }
  return std::nullopt;
}

}  // namespace dstruct
