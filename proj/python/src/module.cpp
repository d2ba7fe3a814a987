// Python bindings: store, codecs, validation, history, the conveyor
// simulation and the unscrewing loop.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kapps/flexconveyor.hpp"
#include "kapps/history.hpp"
#include "kapps/resources.hpp"
#include "kapps/shacl.hpp"
#include "kapps/sparql.hpp"
#include "kapps/store_dump.hpp"
#include "kapps/timeseries.hpp"
#include "kapps/turtle.hpp"
#include "kapps/unscrew.hpp"

namespace py = pybind11;
using namespace kapps;

namespace {

py::object g_rejected;

std::string graph_iri(const std::string& name) {
  if (name == "default") return vocab::kDefaultGraph;
  if (name == "shapes") return vocab::kShapesGraph;
  if (name == "ontology") return vocab::kOntologyGraph;
  return name;
}

std::vector<Triple> triples_of(const std::string& turtle) { return parse_turtle(turtle).triples; }

// ASK gives a bool, SELECT a list of {var: Term} dicts.
py::object to_python(const sparql::QueryResult& r) {
  if (r.is_ask) return py::bool_(r.ask);
  py::list rows;
  for (const auto& b : r.rows) {
    py::dict d;
    for (const auto& [k, v] : b) d[py::str(k)] = v;
    rows.append(d);
  }
  return rows;
}

py::object run_query(const Snapshot& view, const std::string& text) {
  auto q = sparql::parse_query(text, standard_prefixes());
  return to_python(sparql::evaluate(q, view));
}

Snapshot view_at(const Store& s, const py::object& at) {
  if (at.is_none()) return s.snapshot();
  if (py::isinstance<py::str>(at)) {
    auto ts = parse_timestamp(at.cast<std::string>());
    if (!ts) throw py::value_error("not an xsd:dateTime: " + at.cast<std::string>());
    return s.state_at(*ts);
  }
  auto k = at.cast<TxnId>();
  if (k > s.head()) throw py::index_error("no transaction " + std::to_string(k));
  return s.state_at(k);
}

ValidationReport validate_view(const Snapshot& view) {
  return shacl::validate(view, shacl::load_shapes(view));
}

TxnId insert_turtle(Store& s, const std::string& turtle, const std::string& graph,
                    const std::string& actor) {
  TransactionDelta d;
  d.actor = actor;
  Term g = Term::iri(graph_iri(graph));
  for (const auto& t : triples_of(turtle)) d.inserts.insert({t.s, t.p, t.o, g});
  return s.apply_transaction(std::move(d));
}

py::dict entry_dict(const HistoryEntry& e) {
  py::dict d;
  d["txn"] = e.txn;
  d["timestamp"] = format_timestamp(e.timestamp);
  d["actor"] = e.actor;
  d["inserts"] = std::vector<Quad>(e.inserts.begin(), e.inserts.end());
  d["deletes"] = std::vector<Quad>(e.deletes.begin(), e.deletes.end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_kapps, m) {
  m.doc() = "Knowledge-graph runtime for circular-factory production systems";

  py::enum_<TermKind>(m, "TermKind")
      .value("IRI", TermKind::Iri)
      .value("BLANK", TermKind::Blank)
      .value("LITERAL", TermKind::Literal);

  py::class_<Term>(m, "Term")
      .def_static("iri", &Term::iri)
      .def_static("blank", &Term::blank)
      .def_static("literal", &Term::literal, py::arg("lexical"), py::arg("datatype") = "",
                  py::arg("lang") = "")
      .def_property_readonly("kind", &Term::kind)
      .def_property_readonly("value", &Term::value)
      .def_property_readonly("datatype", &Term::datatype)
      .def_property_readonly("lang", &Term::lang)
      .def("is_iri", &Term::is_iri)
      .def("is_blank", &Term::is_blank)
      .def("is_literal", &Term::is_literal)
      .def("to_python", [](const Term& t) -> py::object {
        if (!t.is_literal()) return py::str(t.value());
        if (auto b = t.boolean_value()) return py::bool_(*b);
        if (t.datatype() == vocab::kXsd + "integer") return py::int_(std::stoll(t.value()));
        if (auto n = t.numeric_value()) return py::float_(static_cast<double>(*n));
        return py::str(t.value());
      }, "Literal value as bool/int/float/str; IRIs and blank labels as str")
      .def("__str__", &Term::to_string)
      .def("__repr__", [](const Term& t) { return "Term(" + t.to_string() + ")"; })
      .def(py::self == py::self)
      .def(py::self < py::self)
      .def("__hash__", [](const Term& t) { return TermHash{}(t); });

  py::class_<Quad>(m, "Quad")
      .def_readonly("s", &Quad::s)
      .def_readonly("p", &Quad::p)
      .def_readonly("o", &Quad::o)
      .def_readonly("g", &Quad::g)
      .def("__repr__", [](const Quad& q) { return to_string(q); });

  py::class_<Triple>(m, "Triple")
      .def_readonly("s", &Triple::s)
      .def_readonly("p", &Triple::p)
      .def_readonly("o", &Triple::o);

  py::class_<ValidationResult>(m, "ValidationResult")
      .def_readonly("focus_node", &ValidationResult::focus_node)
      .def_readonly("result_path", &ValidationResult::result_path)
      .def_readonly("value", &ValidationResult::value)
      .def_readonly("source_constraint_component", &ValidationResult::source_constraint_component)
      .def_readonly("severity", &ValidationResult::severity)
      .def_readonly("message", &ValidationResult::message)
      .def_readonly("source_shape", &ValidationResult::source_shape);

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("conforms", &ValidationReport::conforms)
      .def_readonly("results", &ValidationReport::results)
      .def("to_turtle", [](const ValidationReport& r, bool rdf4j) {
        return shacl::serialize_report(r, {rdf4j});
      }, py::arg("rdf4j") = false)
      .def("__bool__", [](const ValidationReport& r) { return r.conforms; });

  g_rejected = py::exception<TransactionRejected>(m, "TransactionRejected");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const TransactionRejected& e) {
      py::object exc = g_rejected(e.what());
      exc.attr("report") = py::cast(e.report());
      PyErr_SetObject(g_rejected.ptr(), exc.ptr());
    }
  });
  py::register_exception<MalformedDelta>(m, "MalformedDelta", PyExc_ValueError);
  py::register_exception<TurtleError>(m, "TurtleError", PyExc_ValueError);
  py::register_exception<sparql::SparqlSyntaxError>(m, "SparqlSyntaxError", PyExc_ValueError);
  py::register_exception<shacl::ShapesError>(m, "ShapesError", PyExc_ValueError);
  py::register_exception<uc1::InsufficientData>(m, "InsufficientData", PyExc_RuntimeError);

  m.def("parse_turtle", &triples_of, py::arg("text"));
  m.def("serialize_turtle", [](const std::vector<Triple>& t) {
    return serialize_turtle(t, standard_prefixes());
  });
  m.def("resource", [](const std::string& name) { return std::string(resource(name)); },
        "Text of a compiled-in ontology, shape or fixture file");
  m.def("resource_names", &resource_names, py::arg("prefix") = "");

  m.def("validate", [](const std::string& data, const std::string& shapes) {
    auto s = shacl::parse_shapes(shapes);
    std::set<Quad> q;
    Term g = Term::iri(vocab::kDefaultGraph);
    for (const auto& t : triples_of(data)) q.insert({t.s, t.p, t.o, g});
    return shacl::validate(Snapshot::from_quads(q, 0), s);
  }, py::arg("data"), py::arg("shapes"), "Validates Turtle data against Turtle shapes");

  py::class_<Snapshot>(m, "Snapshot")
      .def_property_readonly("txn", &Snapshot::txn)
      .def("__len__", &Snapshot::size)
      .def("quads", &Snapshot::quads)
      .def("query", &run_query, py::arg("sparql"))
      .def("validate", &validate_view);

  py::class_<Store>(m, "Store")
      .def(py::init([](bool gated, bool focus_scope) {
             AdmissionGate gate;
             if (gated) gate = shacl::make_admission_gate({vocab::kShapesGraph, focus_scope});
             return std::make_unique<Store>(gate);
           }),
           py::arg("gated") = true, py::arg("focus_scope") = false)
      .def("load_graph", [](Store& s, const std::string& turtle, const std::string& graph) {
        return s.load_graph(turtle, graph_iri(graph));
      }, py::arg("turtle"), py::arg("graph") = "default",
         "Ungated bootstrap load; graph is 'default', 'shapes', 'ontology' or an IRI")
      .def("insert", &insert_turtle, py::arg("turtle"), py::arg("graph") = "default",
           py::arg("actor") = "urn:kapps:actor:python",
           "Gated insert; raises TransactionRejected with the report")
      .def("delete", [](Store& s, const std::string& turtle, const std::string& graph,
                        const std::string& actor) {
        TransactionDelta d;
        d.actor = actor;
        Term g = Term::iri(graph_iri(graph));
        for (const auto& t : triples_of(turtle)) d.deletes.insert({t.s, t.p, t.o, g});
        return s.apply_transaction(std::move(d));
      }, py::arg("turtle"), py::arg("graph") = "default", py::arg("actor") = "urn:kapps:actor:python")
      .def("query", [](const Store& s, const std::string& text, const py::object& at) {
        return run_query(view_at(s, at), text);
      }, py::arg("sparql"), py::arg("at") = py::none(),
         "at: transaction id or xsd:dateTime string for a past state")
      .def("validate", [](const Store& s) { return validate_view(s.snapshot()); })
      .def("snapshot", &Store::snapshot)
      .def("state_at", [](const Store& s, const py::object& at) { return view_at(s, at); })
      .def_property_readonly("head", &Store::head)
      .def("__len__", [](const Store& s) { return s.snapshot().size(); })
      .def("history", [](const Store& s) {
        py::list out;
        for (const auto& e : s.history().entries()) out.append(entry_dict(e));
        return out;
      })
      .def("dump", &dump_store)
      .def("restore", [](Store& s, const std::string& dump) { restore_store(s, dump); })
      .def("save", &save_store)
      .def("load", &load_store);

  m.def("conveyor_store", &conveyor::make_store, py::arg("focus_scope") = false,
        "Gated store with the conveyor ontology and shapes loaded");
  m.def("uc1_store", &uc1::make_store, "Gated store with the unscrewing vocabulary loaded");

  // --- conveyor simulation ---------------------------------------------------

  py::class_<conveyor::RejectionEvent>(m, "RejectionEvent")
      .def_readonly("tick", &conveyor::RejectionEvent::tick)
      .def_readonly("actor", &conveyor::RejectionEvent::actor)
      .def_readonly("action", &conveyor::RejectionEvent::action)
      .def_readonly("box", &conveyor::RejectionEvent::box)
      .def_readonly("source_constraint_component",
                    &conveyor::RejectionEvent::source_constraint_component)
      .def_readonly("focus_node", &conveyor::RejectionEvent::focus_node)
      .def_readonly("message", &conveyor::RejectionEvent::message)
      .def_readonly("report", &conveyor::RejectionEvent::report)
      .def_readonly("quads_before", &conveyor::RejectionEvent::quads_before)
      .def_readonly("quads_after", &conveyor::RejectionEvent::quads_after);

  py::class_<conveyor::SimReport>(m, "SimReport")
      .def_readonly("boxes", &conveyor::SimReport::boxes)
      .def_readonly("delivered", &conveyor::SimReport::delivered)
      .def_readonly("ticks", &conveyor::SimReport::ticks)
      .def_readonly("admitted_transactions", &conveyor::SimReport::admitted_transactions)
      .def_readonly("nonconforming_transactions", &conveyor::SimReport::nonconforming_transactions)
      .def_readonly("possession_violations", &conveyor::SimReport::possession_violations)
      .def_readonly("rejections", &conveyor::SimReport::rejections)
      .def_readonly("paths", &conveyor::SimReport::paths)
      .def_readonly("trace", &conveyor::SimReport::trace)
      .def("rejections_with", &conveyor::SimReport::rejections_with)
      .def("to_text", &conveyor::SimReport::to_text);

  m.def("simulate", [](int width, int height, int boxes, const std::string& fault,
                       double fault_probability, std::uint64_t seed, int max_ticks,
                       bool stage_occupied, bool validate_every_commit, bool threaded) {
    conveyor::SimConfig c;
    c.width = width;
    c.height = height;
    c.boxes = boxes;
    auto mode = conveyor::parse_fault_mode(fault);
    if (!mode) throw py::value_error("unknown fault mode: " + fault);
    c.fault = *mode;
    c.fault_probability = fault_probability;
    c.seed = seed;
    c.max_ticks = max_ticks;
    c.stage_occupied = stage_occupied;
    c.validate_every_commit = validate_every_commit;
    c.threaded = threaded;
    py::gil_scoped_release nogil;
    return conveyor::run_simulation(c);
  }, py::arg("width") = 3, py::arg("height") = 3, py::arg("boxes") = 5, py::arg("fault") = "none",
     py::arg("fault_probability") = 1.0, py::arg("seed") = 42, py::arg("max_ticks") = 0,
     py::arg("stage_occupied") = false, py::arg("validate_every_commit") = false,
     py::arg("threaded") = false);

  // --- unscrewing loop -------------------------------------------------------

  auto uc = m.def_submodule("uc1", "Robotic unscrewing: perception, detection and learning");

  py::class_<uc1::DetectionParameters>(uc, "DetectionParameters")
      .def(py::init<>())
      .def_readwrite("m_lower", &uc1::DetectionParameters::m_lower)
      .def_readwrite("m_upper", &uc1::DetectionParameters::m_upper)
      .def_readwrite("f_max", &uc1::DetectionParameters::f_max)
      .def_readwrite("travel_min", &uc1::DetectionParameters::travel_min)
      .def_readwrite("travel_max", &uc1::DetectionParameters::travel_max)
      .def(py::self == py::self)
      .def("__repr__", [](const uc1::DetectionParameters& p) {
        return py::str("DetectionParameters(m_lower={}, m_upper={}, f_max={}, travel_min={}, "
                       "travel_max={})")
            .format(p.m_lower, p.m_upper, p.f_max, p.travel_min, p.travel_max)
            .cast<std::string>();
      });

  py::class_<uc1::Features>(uc, "Features")
      .def(py::init([](double m, double f, double t) { return uc1::Features{m, f, t}; }),
           py::arg("m_peak"), py::arg("f_peak"), py::arg("travel"))
      .def_readonly("m_peak", &uc1::Features::m_peak)
      .def_readonly("f_peak", &uc1::Features::f_peak)
      .def_readonly("travel", &uc1::Features::travel);

  uc.def("classify", [](const uc1::Features& f, const uc1::DetectionParameters& p) {
    return uc1::to_string(uc1::classify_features(f, p));
  });
  uc.def("percentile", &uc1::percentile, py::arg("values"), py::arg("q"));
  uc.def("estimate_parameters", &uc1::estimate_parameters, py::arg("successes"));

  uc.def("generate", [](const std::string& out, int count, std::uint64_t seed, double share) {
    uc1::GeneratorConfig g;
    g.count = count;
    g.seed = seed;
    g.success_share = share;
    uc1::write_corpus(uc1::generate_corpus(g), out);
  }, py::arg("out"), py::arg("count") = 30, py::arg("seed") = 7, py::arg("success_share") = 0.7,
     "Writes a synthetic recordings corpus to a directory");

  py::class_<uc1::CycleRecord>(uc, "CycleRecord")
      .def_readonly("cycle", &uc1::CycleRecord::cycle)
      .def_readonly("operation", &uc1::CycleRecord::operation)
      .def_property_readonly("label", [](const uc1::CycleRecord& c) { return uc1::to_string(c.label); })
      .def_property_readonly("expected", [](const uc1::CycleRecord& c) -> std::optional<std::string> {
        if (!c.expected) return std::nullopt;
        return uc1::to_string(*c.expected);
      })
      .def_readonly("features", &uc1::CycleRecord::features)
      .def_readonly("parameters", &uc1::CycleRecord::parameters);

  py::class_<uc1::LearnEvent>(uc, "LearnEvent")
      .def_readonly("after_cycle", &uc1::LearnEvent::after_cycle)
      .def_readonly("applied", &uc1::LearnEvent::applied)
      .def_readonly("error", &uc1::LearnEvent::error)
      .def_readonly("before", &uc1::LearnEvent::before)
      .def_readonly("after", &uc1::LearnEvent::after)
      .def_readonly("txn", &uc1::LearnEvent::txn);

  py::class_<uc1::LoopReport>(uc, "LoopReport")
      .def_readonly("cycles", &uc1::LoopReport::cycles)
      .def_readonly("learn_events", &uc1::LoopReport::learn_events)
      .def("to_text", &uc1::LoopReport::to_text);

  py::class_<TsStore>(uc, "TsStore")
      .def(py::init<>())
      .def(py::init<std::filesystem::path>(), py::arg("directory"))
      .def("raw", &TsStore::raw)
      .def("__len__", &TsStore::size)
      .def("uris", &TsStore::uris);

  uc.def("run", [](Store& store, TsStore& ts, const std::string& recordings, int cycles,
                   int learn_every, int nmin, std::uint64_t seed, bool services) {
    uc1::LoopConfig c;
    c.cycles = cycles;
    c.learn_every = learn_every;
    c.nmin = nmin;
    c.via_middleware = services;
    if (!recordings.empty()) return uc1::run_loop(c, recordings, store, ts);
    uc1::GeneratorConfig g;
    g.count = std::max(1, cycles);
    g.seed = seed;
    return uc1::run_loop(c, uc1::generate_corpus(g), store, ts);
  }, py::arg("store"), py::arg("ts"), py::arg("recordings") = "", py::arg("cycles") = 30,
     py::arg("learn_every") = 10, py::arg("nmin") = 10, py::arg("seed") = 7,
     py::arg("services") = false,
     "Closed loop over a recordings directory, or a generated corpus when none is given");

  uc.def("trace", [](const Store& store, const std::string& op) {
    auto t = uc1::trace_operation(store, op);
    py::dict d;
    d["operation"] = t.operation;
    d["screw"] = t.screw;
    d["resource"] = t.resource;
    d["records"] = t.record_uris;
    d["label"] = uc1::to_string(t.label);
    d["success"] = t.success;
    d["decided_by"] = t.decided_by;
    d["activity"] = t.activity;
    d["decided_at"] = format_timestamp(t.decided_at);
    d["parameters"] = t.parameters;
    return d;
  }, py::arg("store"), py::arg("operation"));
}
