#include "fedat/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace fedat {
namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so leftovers can be
// flagged as unknown.
class Reader {
 public:
  Reader(const json* obj, std::string prefix, std::vector<std::string>& errors)
      : obj_(obj), prefix_(std::move(prefix)), errors_(errors) {
    if (obj_ && !obj_->is_object()) {
      fail("", "must be an object");
      obj_ = nullptr;
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v || v->is_null()) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
    }
  }

  void read_real(const std::string& key, double& out) {
    const json* v = find(key);
    if (!v || v->is_null()) return;
    if (v->is_number()) {
      out = v->get<double>();
    } else if (v->is_string()) {
      try {
        out = parse_fraction(v->get<std::string>());
      } catch (const Error&) {
        fail(key, "is not a number or fraction");
      }
    } else {
      fail(key, "is not a number or fraction");
    }
  }

  Reader child(const std::string& key) {
    const json* v = find(key);
    return Reader(v && !v->is_null() ? v : nullptr, path(key), errors_);
  }

  bool has(const std::string& key) {
    const json* v = find(key);
    return v && !v->is_null();
  }

  void fail(const std::string& key, const std::string& msg) { errors_.push_back(path(key) + " " + msg); }

  void finish() {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!seen_.count(it.key())) errors_.push_back(path(it.key()) + " is not a known field");
  }

 private:
  const json* find(const std::string& key) {
    seen_.insert(key);
    if (!obj_) return nullptr;
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const {
    if (key.empty()) return prefix_.empty() ? "config" : prefix_;
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* obj_;
  std::string prefix_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void read_attack(Reader r, AttackConfig& a) {
  r.read("t_steps", a.steps);
  r.read_real("epsilon", a.epsilon);
  r.read_real("alpha", a.alpha);
  r.read_real("lo", a.lo);
  r.read_real("hi", a.hi);
  r.read("random_start", a.random_start);
  r.finish();
}

json attack_json(const AttackConfig& a) {
  return {{"t_steps", a.steps}, {"epsilon", a.epsilon}, {"alpha", a.alpha},
          {"lo", a.lo},         {"hi", a.hi},           {"random_start", a.random_start}};
}

template <typename F>
void check(std::vector<std::string>& errors, F&& validate) {
  try {
    validate();
  } catch (const Error& e) {
    errors.emplace_back(e.what());
  }
}

}  // namespace

std::string to_string(FusionKind k) { return k == FusionKind::fedcurv ? "fedcurv" : "fedavg"; }

std::optional<ExperimentConfig> parse_config(const json& doc, std::vector<std::string>& errors) {
  ExperimentConfig c;
  Reader root(&doc, "", errors);
  root.read("seed", c.seed);
  root.read("rounds", c.rounds);
  root.read("clients", c.clients);
  root.read("natural_training", c.natural_training);
  root.read("checkpoint_every", c.checkpoint_every);

  {
    Reader r = root.child("model");
    r.read("layer_sizes", c.model.layer_sizes);
    std::string act = to_string(c.model.activation);
    r.read("activation", act);
    check(errors, [&] { c.model.activation = activation_from_string(act); });
    c.model.seed = c.seed;
    r.read("seed", c.model.seed);
    r.finish();
  }
  {
    Reader r = root.child("data");
    auto& s = c.data.synthetic;
    r.read("source", c.data.source);
    r.read("class_count", s.class_count);
    r.read("per_class", s.per_class);
    r.read("test_per_class", c.data.test_per_class);
    r.read("input_dim", s.input_dim);
    r.read_real("separation", s.separation);
    r.read_real("noise", s.noise);
    r.read("csv_train", c.data.csv_train);
    r.read("csv_test", c.data.csv_test);
    r.read("rescale", c.data.rescale);
    r.finish();
    s.seed = c.seed;
  }
  {
    Reader r = root.child("partition");
    std::string kind = c.non_iid ? "non_iid" : "iid";
    r.read("kind", kind);
    if (kind == "iid")
      c.non_iid = false;
    else if (kind == "non_iid")
      c.non_iid = true;
    else
      r.fail("kind", "must be 'iid' or 'non_iid'");
    r.read_real("skew", c.skew);
    r.finish();
  }
  read_attack(root.child("attack"), c.attack);
  {
    Reader r = root.child("optimizer");
    auto& o = c.optimizer;
    std::string kind = to_string(o.kind);
    r.read("kind", kind);
    check(errors, [&] { o.kind = optimizer_kind_from_string(kind); });
    r.read_real("learning_rate", o.learning_rate);
    r.read_real("momentum", o.momentum);
    r.read_real("beta1", o.beta1);
    r.read_real("beta2", o.beta2);
    r.read_real("eps_hat", o.eps_hat);
    r.read("batch_size", o.batch_size);
    r.read("reset_each_round", o.reset_each_round);
    r.finish();
  }
  {
    Reader r = root.child("fusion");
    std::string kind = to_string(c.fusion);
    r.read("kind", kind);
    if (kind == "fedavg")
      c.fusion = FusionKind::fedavg;
    else if (kind == "fedcurv")
      c.fusion = FusionKind::fedcurv;
    else
      r.fail("kind", "must be 'fedavg' or 'fedcurv'");
    r.read_real("lambda", c.lambda);
    r.finish();
  }
  {
    Reader r = root.child("schedule");
    if (r.has("fixed_e")) {
      int e = 1;
      r.read("fixed_e", e);
      c.schedule = ESchedule::fixed(e);
      if (r.has("e0") || r.has("gamma_e") || r.has("freq_e"))
        r.fail("fixed_e", "cannot be combined with e0/gamma_e/freq_e");
    } else {
      r.read("e0", c.schedule.e0);
      r.read_real("gamma_e", c.schedule.gamma);
      r.read("freq_e", c.schedule.freq);
    }
    r.finish();
  }
  {
    Reader r = root.child("eval");
    r.read("every", c.eval.every);
    r.read("adversarial", c.eval.adversarial);
    if (r.has("attack")) {
      AttackConfig a = c.attack;
      read_attack(r.child("attack"), a);
      c.eval.attack = a;
    }
    std::string policy = "absent";
    r.read("natural_adv", policy);
    if (policy == "absent")
      c.eval.natural_adv = NaturalAdvPolicy::absent;
    else if (policy == "zero")
      c.eval.natural_adv = NaturalAdvPolicy::zero;
    else if (policy == "measured")
      c.eval.natural_adv = NaturalAdvPolicy::measured;
    else
      r.fail("natural_adv", "must be 'absent', 'zero' or 'measured'");
    r.finish();
  }
  {
    Reader r = root.child("svcca");
    r.read("every", c.svcca.every);
    r.read("layers", c.svcca.layers);
    r.read_real("variance_keep", c.svcca.variance_keep);
    r.read("probe_size", c.svcca.probe_size);
    r.finish();
  }
  root.finish();

  if (c.rounds < 1) errors.emplace_back("rounds must be >= 1");
  if (c.clients < 1) errors.emplace_back("clients must be >= 1");
  if (c.checkpoint_every < 0) errors.emplace_back("checkpoint_every must be >= 0");
  if (!(c.lambda >= 0.0)) errors.emplace_back("fusion.lambda must be >= 0");
  check(errors, [&] { c.model.validate(); });
  check(errors, [&] { c.attack.validate(); });
  if (c.eval.attack) check(errors, [&] { c.eval.attack->validate(); });
  check(errors, [&] { c.optimizer.validate(); });
  check(errors, [&] { c.schedule.validate(); });
  if (c.eval.every < 0) errors.emplace_back("eval.every must be >= 0");
  if (c.svcca.every < 0) errors.emplace_back("svcca.every must be >= 0");
  if (c.svcca.probe_size < 1) errors.emplace_back("svcca.probe_size must be >= 1");
  if (!(c.svcca.variance_keep > 0.0 && c.svcca.variance_keep <= 1.0))
    errors.emplace_back("svcca.variance_keep must lie in (0, 1]");
  if (c.svcca.every > 0 && c.clients < 2) errors.emplace_back("svcca tracking needs at least 2 clients");
  for (int l : c.svcca.layers)
    if (l < 0 || (c.model.layer_sizes.size() >= 2 && l >= c.model.depth()))
      errors.push_back("svcca.layers entry " + std::to_string(l) + " is out of range");

  if (c.data.source == "synthetic") {
    const auto& s = c.data.synthetic;
    if (s.class_count < 2) errors.emplace_back("data.class_count must be >= 2");
    if (s.per_class < 1) errors.emplace_back("data.per_class must be >= 1");
    if (c.data.test_per_class < 1) errors.emplace_back("data.test_per_class must be >= 1");
    if (s.input_dim < 1) errors.emplace_back("data.input_dim must be >= 1");
    if (!(s.separation >= 0.0) || !(s.noise >= 0.0)) errors.emplace_back("data.separation and data.noise must be >= 0");
    if (!c.model.layer_sizes.empty()) {
      if (c.model.layer_sizes.front() != s.input_dim)
        errors.emplace_back("model.layer_sizes must start with data.input_dim");
      if (c.model.layer_sizes.back() != s.class_count)
        errors.emplace_back("model.layer_sizes must end with data.class_count");
    }
    if (c.non_iid && c.clients >= 1) check(errors, [&] { PartitionSpec{c.clients, c.skew, c.seed}.validate(s.class_count); });
  } else if (c.data.source == "csv") {
    if (c.data.csv_train.empty()) errors.emplace_back("data.csv_train is required for csv data");
    if (c.data.csv_test.empty()) errors.emplace_back("data.csv_test is required for csv data");
  } else {
    errors.emplace_back("data.source must be 'synthetic' or 'csv'");
  }

  if (!errors.empty()) return std::nullopt;
  return c;
}

ExperimentConfig config_from_json(const json& doc) {
  std::vector<std::string> errors;
  auto c = parse_config(doc, errors);
  if (!c) {
    std::ostringstream os;
    os << "invalid config: ";
    for (std::size_t i = 0; i < errors.size(); ++i) os << (i ? "; " : "") << errors[i];
    throw Error(os.str());
  }
  return *c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["rounds"] = c.rounds;
  j["clients"] = c.clients;
  j["natural_training"] = c.natural_training;
  j["checkpoint_every"] = c.checkpoint_every;
  j["model"] = {{"layer_sizes", c.model.layer_sizes}, {"activation", to_string(c.model.activation)}, {"seed", c.model.seed}};
  const auto& s = c.data.synthetic;
  j["data"] = {{"source", c.data.source},       {"class_count", s.class_count},
               {"per_class", s.per_class},      {"test_per_class", c.data.test_per_class},
               {"input_dim", s.input_dim},      {"separation", s.separation},
               {"noise", s.noise},              {"csv_train", c.data.csv_train},
               {"csv_test", c.data.csv_test},   {"rescale", c.data.rescale}};
  j["partition"] = {{"kind", c.non_iid ? "non_iid" : "iid"}, {"skew", c.skew}};
  j["attack"] = attack_json(c.attack);
  const auto& o = c.optimizer;
  j["optimizer"] = {{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate}, {"momentum", o.momentum},
                    {"beta1", o.beta1},          {"beta2", o.beta2},                 {"eps_hat", o.eps_hat},
                    {"batch_size", o.batch_size}, {"reset_each_round", o.reset_each_round}};
  j["fusion"] = {{"kind", to_string(c.fusion)}, {"lambda", c.lambda}};
  if (c.schedule.is_fixed())
    j["schedule"] = {{"fixed_e", c.schedule.e0}};
  else
    j["schedule"] = {{"e0", c.schedule.e0}, {"gamma_e", c.schedule.gamma}, {"freq_e", c.schedule.freq}};
  const char* policy = c.eval.natural_adv == NaturalAdvPolicy::zero      ? "zero"
                       : c.eval.natural_adv == NaturalAdvPolicy::measured ? "measured"
                                                                          : "absent";
  j["eval"] = {{"every", c.eval.every}, {"adversarial", c.eval.adversarial}, {"natural_adv", policy}};
  if (c.eval.attack) j["eval"]["attack"] = attack_json(*c.eval.attack);
  j["svcca"] = {{"every", c.svcca.every},
                {"layers", c.svcca.layers},
                {"variance_keep", c.svcca.variance_keep},
                {"probe_size", c.svcca.probe_size}};
  return j;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::string parent;
  std::string leaf = key;
  std::size_t start = 0;
  for (auto dot = key.find('.'); dot != std::string::npos; dot = key.find('.', start)) {
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw Error("override key '" + key + "' has an empty segment");
    if (!node->is_object()) throw Error("override key '" + key + "' descends into a non-object");
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    parent = part;
    start = dot + 1;
  }
  leaf = key.substr(start);
  if (leaf.empty()) throw Error("override key '" + key + "' has an empty segment");
  if (!node->is_object()) throw Error("override key '" + key + "' descends into a non-object");

  if (parent == "schedule" && node == &doc["schedule"]) {
    if (leaf == "fixed_e") {
      node->erase("e0");
      node->erase("gamma_e");
      node->erase("freq_e");
    } else if (leaf == "e0" || leaf == "gamma_e" || leaf == "freq_e") {
      node->erase("fixed_e");
    }
  }
  (*node)[leaf] = value;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config file not found: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config file " + path + " is not valid JSON: " + e.what());
  }
}

}  // namespace fedat
