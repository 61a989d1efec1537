#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cli.hpp"
#include "darkgram/analytics.hpp"
#include "darkgram/classify.hpp"
#include "darkgram/discover.hpp"
#include "darkgram/errors.hpp"
#include "darkgram/fixtures.hpp"
#include "darkgram/ingest.hpp"
#include "darkgram/payload.hpp"
#include "darkgram/scan.hpp"
#include "darkgram/serialize.hpp"
#include "darkgram/stats.hpp"

namespace py = pybind11;
using namespace darkgram;

namespace {

// Records cross the boundary as plain dicts and lists.
py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

PipelineConfig config_from(const py::object& o) {
  if (o.is_none()) return {};
  json j = json(PipelineConfig{});
  j.update(from_py(o));
  auto cfg = j.get<PipelineConfig>();
  if (auto v = validate_config(cfg); !v.empty()) throw InputError(describe(v));
  return cfg;
}

LabeledCorpus corpus_from(const py::list& items) {
  LabeledCorpus c;
  for (const auto& it : items) {
    auto j = from_py(it);
    auto label = label_from_string(j.at("label").get<std::string>());
    if (!label) throw InputError("unknown label " + j.at("label").dump());
    c.items.push_back({j.value("text", ""), j.value("filenames", std::vector<std::string>{}), *label});
  }
  return c;
}

py::list corpus_to(const LabeledCorpus& c) {
  py::list out;
  for (const auto& it : c.items) {
    py::dict d;
    d["text"] = it.text;
    d["filenames"] = it.filenames;
    d["label"] = std::string(to_string(it.label));
    out.append(d);
  }
  return out;
}

// Owns whichever backend was loaded or trained.
class Model {
 public:
  explicit Model(std::shared_ptr<ClassifierBackend> b) : backend_(std::move(b)) {}
  static Model load(const std::filesystem::path& dir) { return Model(load_backend(dir)); }
  static Model train(const py::list& items, std::uint64_t seed) {
    return Model(std::make_shared<BaselineModel>(train_baseline(corpus_from(items), seed)));
  }
  void save(const std::filesystem::path& dir) const {
    auto* b = dynamic_cast<const BaselineModel*>(backend_.get());
    if (!b) throw InputError("only baseline models can be saved from Python");
    b->save(dir);
  }
  std::string backend_id() const { return backend_->backend_id(); }
  py::object classify(const std::string& text, const std::vector<std::string>& filenames, double gate) const {
    return to_py(json(classify_text(*backend_, text, filenames, gate)));
  }
  std::string evaluate(const py::list& items, double gate) const {
    return darkgram::evaluate(*backend_, corpus_from(items), gate).to_csv();
  }
  double macro_f1(const py::list& items, double gate) const {
    return darkgram::evaluate(*backend_, corpus_from(items), gate).macro_f1;
  }
  const ClassifierBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<ClassifierBackend> backend_;
};

}  // namespace

PYBIND11_MODULE(_darkgram, m) {
  m.doc() = "darkgram core: classification, scanning rules, discovery and analytics";

  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<EnvironmentError>(m, "EnvironmentError", PyExc_OSError);
  py::register_exception<TransientError>(m, "TransientError", PyExc_RuntimeError);
  py::register_exception<PermanentError>(m, "PermanentError", PyExc_RuntimeError);

  m.def("default_config", [] { return to_py(json(PipelineConfig{})); });

  m.def("extract_links", [](const std::string& text) { return extract_links(text); });
  m.def("tme_links", [](const std::string& text) { return tme_links_in_text(text); });

  m.def("decide_url", [](std::int64_t hits, std::optional<bool> fallback, const py::object& config) {
    return std::string(to_string(decide_url(hits, fallback, config_from(config))));
  }, py::arg("engine_hits"), py::arg("fallback") = py::none(), py::arg("config") = py::none());
  m.def("decide_file", [](bool sandbox, std::int64_t av_hits, const py::object& config) {
    return std::string(to_string(decide_file(sandbox, av_hits, config_from(config))));
  }, py::arg("sandbox_detected"), py::arg("av_hits"), py::arg("config") = py::none());

  m.def("detect_payload_kind", [](const std::string& text, const std::vector<std::string>& filenames) {
    return std::string(to_string(detect_payload_kind(text, filenames)));
  }, py::arg("text"), py::arg("filenames") = std::vector<std::string>{});
  m.def("parse_credential_stats", [](const std::string& filename, const std::string& text) {
    auto s = parse_credential_stats(filename, text);
    py::dict d;
    d["estimated_count"] = s.estimated_count ? py::cast(*s.estimated_count) : py::none();
    d["service"] = s.service ? py::cast(*s.service) : py::none();
    d["countries"] = std::vector<std::string>(s.countries.begin(), s.countries.end());
    d["large_leak"] = s.large_leak;
    return d;
  }, py::arg("filename"), py::arg("text") = "");

  py::class_<Model>(m, "Model")
      .def_static("load", &Model::load, py::arg("path"))
      .def_static("train", &Model::train, py::arg("items"), py::arg("seed") = 0)
      .def("save", &Model::save, py::arg("path"))
      .def_property_readonly("backend_id", &Model::backend_id)
      .def("classify", &Model::classify, py::arg("text"), py::arg("filenames") = std::vector<std::string>{},
           py::arg("gate_threshold") = 0.5)
      .def("evaluate_csv", &Model::evaluate, py::arg("items"), py::arg("gate_threshold") = 0.5)
      .def("macro_f1", &Model::macro_f1, py::arg("items"), py::arg("gate_threshold") = 0.5);

  m.def("generate_corpus", [](std::size_t per_class, std::uint64_t seed) {
    return corpus_to(fixtures::generate_corpus(per_class, seed));
  }, py::arg("per_class"), py::arg("seed") = 0);
  m.def("stratified_split", [](const py::list& items, double ratio, std::uint64_t seed) {
    auto c = corpus_from(items);
    auto s = stratified_split(c, ratio, seed);
    return py::make_tuple(corpus_to(c.subset(s.train)), corpus_to(c.subset(s.test)));
  }, py::arg("items"), py::arg("train_ratio") = 0.7, py::arg("seed") = 0);

  m.def("discover_replay", [](const std::filesystem::path& script, const std::vector<std::string>& seeds,
                              const Model& model, std::optional<Timestamp> start, std::optional<Timestamp> horizon,
                              const py::object& config) {
    auto cfg = config_from(config);
    auto src = ReplaySource::from_file(script);
    src.advance_to(std::max(src.now(), start.value_or(src.last_event_time())));
    FrontierResult r;
    {
      py::gil_scoped_release release;
      r = run_frontier_with_rechecks(seeds, src, model.backend(), cfg, [&](Timestamp t) { src.advance_to(t); },
                                     horizon.value_or(src.now()));
    }
    py::list out;
    for (const auto& d : r.decisions) out.append(to_py(json(d)));
    return out;
  }, py::arg("script"), py::arg("seeds"), py::arg("model"), py::arg("start") = py::none(),
     py::arg("horizon") = py::none(), py::arg("config") = py::none());

  m.def("mann_whitney_u", [](const std::vector<double>& a, const std::vector<double>& b) {
    auto r = mann_whitney_u(a, b);
    py::dict d;
    d["u"] = r.u;
    d["p_value"] = r.p_value;
    d["exact"] = r.exact;
    return d;
  });
  m.def("emoji_share", [](const std::map<std::string, std::int64_t>& counts, std::size_t k) {
    PostRecord p;
    p.reactions = counts;
    return top_k_share(emoji_distribution({p}), k);
  }, py::arg("counts"), py::arg("k") = 10);
  m.def("overlap", [](const std::vector<std::string>& left_urls, const std::vector<std::string>& right_texts) {
    return to_py(to_json_report(forum_overlap(left_urls, right_texts)));
  });
  m.def("damage_csv", [](const py::list& apps, double conversion_rate) {
    std::vector<AppListing> listings;
    for (const auto& a : apps) {
      auto j = from_py(a);
      AppListing l;
      l.category = j.at("category").get<std::string>();
      l.price.app_id = j.value("app_id", "");
      auto pricing = j.value("pricing", std::string("Premium"));
      l.price.pricing = pricing == "Freemium" ? Pricing::Freemium : Pricing::Premium;
      l.price.price_cents = j.at("price_cents").get<std::int64_t>();
      l.views = j.at("views").get<std::int64_t>();
      listings.push_back(std::move(l));
    }
    PipelineConfig cfg;
    cfg.conversion_rate = conversion_rate;
    return estimate_damage(listings, cfg).to_csv();
  }, py::arg("apps"), py::arg("conversion_rate") = 0.10);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = cli::run(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"));
}
