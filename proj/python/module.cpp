#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vnv/bench.hpp"
#include "vnv/error.hpp"
#include "vnv/heap.hpp"
#include "vnv/persistence.hpp"
#include "vnv/storage.hpp"

namespace py = pybind11;
using namespace vnv;

namespace {

py::bytes to_bytes(std::span<const std::byte> data) {
  return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
}

std::vector<std::byte> from_bytes(const py::bytes& b) {
  std::string_view view = b;
  const auto* p = reinterpret_cast<const std::byte*>(view.data());
  return {p, p + view.size()};
}

py::dict record_dict(const bench::BenchRecord& r, const EnergyModel& model) {
  py::dict d;
  d["benchmark"] = r.benchmark;
  d["backend"] = r.backend;
  d["variant"] = r.variant;
  d["cache_size"] = r.cache_size;
  d["dirty_limit"] = r.dirty_limit;
  d["object_size"] = r.object_size;
  d["page_size"] = r.page_size;
  d["pattern"] = r.pattern;
  d["seed"] = r.seed;
  d["initial_len"] = r.initial_len;
  d["metadata_bytes"] = r.metadata_bytes;
  d["words_read"] = r.words_read;
  d["words_written"] = r.words_written;
  d["time_us"] = r.words() * model.word_latency_us;
  d["energy_uj"] = r.words() * model.word_latency_us * model.power_mw * 1e-3;
  d["reps"] = r.reps;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Virtually non-volatile heap over a simulated word-addressed NVM";

  // The module attribute keeps the type alive for the translator.
  static PyObject* vnv_error = py::exception<Error>(m, "VnvError").ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(vnv_error)(e.what());
      instance.attr("code") = to_string(e.code());
      PyErr_SetObject(vnv_error, instance.ptr());
    }
  });

  py::class_<CostMeter>(m, "CostMeter")
      .def_readonly("words_read", &CostMeter::words_read)
      .def_readonly("words_written", &CostMeter::words_written)
      .def_property_readonly("total", &CostMeter::total);

  py::class_<StorageDevice>(m, "StorageDevice")
      .def_property_readonly("capacity", &StorageDevice::capacity)
      .def("read", [](StorageDevice& s, std::size_t off, std::size_t len) { return to_bytes(s.read(off, len)); })
      .def("write", [](StorageDevice& s, std::size_t off, const py::bytes& b) { s.write(off, from_bytes(b)); })
      .def_property_readonly("cost", [](const StorageDevice& s) { return s.cost_meter(); })
      .def("reset_cost_meter", &StorageDevice::reset_cost_meter)
      .def("arm_power_failure", &StorageDevice::arm_power_failure, py::arg("budget_words"))
      .def("disarm_power_failure", &StorageDevice::disarm_power_failure)
      .def_property_readonly("power_failure_armed", &StorageDevice::power_failure_armed);

  py::class_<SimulatedNvm, StorageDevice>(m, "SimulatedNvm")
      .def(py::init<std::size_t>(), py::arg("capacity") = kDefaultNvmCapacity);
  py::class_<FileBackedNvm, StorageDevice>(m, "FileBackedNvm")
      .def(py::init([](const std::string& path, std::size_t capacity) {
             return std::make_unique<FileBackedNvm>(path, capacity);
           }),
           py::arg("path"), py::arg("capacity") = kDefaultNvmCapacity);

  py::class_<HeapConfig>(m, "HeapConfig")
      .def(py::init([](std::size_t cache, std::size_t limit, std::size_t max_objects) {
             return HeapConfig{cache, limit, max_objects};
           }),
           py::arg("cache_size_bytes") = 4096, py::arg("max_modified_state_bytes") = 2048,
           py::arg("max_objects") = 0)
      .def_readwrite("cache_size_bytes", &HeapConfig::cache_size_bytes)
      .def_readwrite("max_modified_state_bytes", &HeapConfig::max_modified_state_bytes)
      .def_readwrite("max_objects", &HeapConfig::max_objects);

  py::class_<ObjectHandle>(m, "ObjectHandle")
      .def_property_readonly("id", &ObjectHandle::id)
      .def_property_readonly("size", &ObjectHandle::size)
      .def("__eq__", [](const ObjectHandle& a, const ObjectHandle& b) { return a == b; })
      .def("__repr__", [](const ObjectHandle& h) {
        return "<ObjectHandle id=" + std::to_string(h.id()) + " size=" + std::to_string(h.size()) + ">";
      });

  py::class_<ObjectState>(m, "ObjectState")
      .def_readonly("resident", &ObjectState::resident)
      .def_readonly("pinned", &ObjectState::pinned)
      .def_readonly("modified", &ObjectState::modified);

  py::class_<HeapStats>(m, "HeapStats")
      .def_readonly("resident_bytes", &HeapStats::resident_bytes)
      .def_readonly("resident_count", &HeapStats::resident_count)
      .def_readonly("dirty_bytes", &HeapStats::dirty_bytes)
      .def_readonly("pinned_count", &HeapStats::pinned_count)
      .def_readonly("cache_free_bytes", &HeapStats::cache_free_bytes)
      .def_readonly("nvm_free_bytes", &HeapStats::nvm_free_bytes)
      .def_readonly("object_count", &HeapStats::object_count);

  py::class_<PersistReport>(m, "PersistReport")
      .def_readonly("words_transferred", &PersistReport::words_transferred)
      .def_readonly("objects_synced", &PersistReport::objects_synced)
      .def_readonly("metadata_bytes_written", &PersistReport::metadata_bytes_written);

  py::class_<ReadGuard>(m, "ReadGuard")
      .def("bytes", [](const ReadGuard& g) { return to_bytes(g.bytes()); })
      .def_property_readonly("live", &ReadGuard::live)
      .def("release", &ReadGuard::release)
      .def("__enter__", [](ReadGuard& g) -> ReadGuard& { return g; }, py::return_value_policy::reference)
      .def("__exit__", [](ReadGuard& g, py::args) { g.release(); });

  py::class_<WriteGuard>(m, "WriteGuard")
      .def("bytes", [](const WriteGuard& g) { return to_bytes(g.bytes()); })
      .def("assign", [](const WriteGuard& g, const py::bytes& b) { g.assign(from_bytes(b)); })
      .def("write_at",
           [](const WriteGuard& g, std::size_t offset, const py::bytes& b) {
             auto data = from_bytes(b);
             auto target = g.bytes();
             if (offset > target.size() || data.size() > target.size() - offset) {
               throw Error(ErrorCode::kOutOfRange, "write past the end of the object");
             }
             std::copy(data.begin(), data.end(), target.begin() + static_cast<long>(offset));
           })
      .def_property_readonly("live", &WriteGuard::live)
      .def("release", &WriteGuard::release)
      .def("__enter__", [](WriteGuard& g) -> WriteGuard& { return g; }, py::return_value_policy::reference)
      .def("__exit__", [](WriteGuard& g, py::args) { g.release(); });

  py::class_<VnvHeap>(m, "VnvHeap")
      .def(py::init<StorageDevice&, const HeapConfig&>(), py::arg("storage"), py::arg("config") = HeapConfig{},
           py::keep_alive<1, 2>())
      .def_static("restore", &VnvHeap::restore, py::arg("storage"), py::keep_alive<0, 1>())
      .def("alloc", [](VnvHeap& h, const py::bytes& b) { return h.alloc(from_bytes(b)); })
      .def("alloc_zeroed", &VnvHeap::alloc_zeroed)
      .def("dealloc", &VnvHeap::dealloc)
      .def("get_ref", &VnvHeap::get_ref, py::keep_alive<0, 1>())
      .def("get_mut", &VnvHeap::get_mut, py::keep_alive<0, 1>())
      .def("read",
           [](VnvHeap& h, const ObjectHandle& handle) {
             auto g = h.get_ref(handle);
             return to_bytes(g.bytes());
           })
      .def("write",
           [](VnvHeap& h, const ObjectHandle& handle, const py::bytes& b) {
             auto g = h.get_mut(handle);
             g.assign(from_bytes(b));
           })
      .def("sync", &VnvHeap::sync)
      .def("unload", &VnvHeap::unload)
      .def("evict", &VnvHeap::evict)
      .def("persist", &VnvHeap::persist)
      .def("stats", &VnvHeap::stats)
      .def("state", &VnvHeap::state)
      .def("handles", &VnvHeap::handles)
      .def("handle_for", &VnvHeap::handle_for)
      .def("resident_ids", &VnvHeap::resident_ids)
      .def_property_readonly("config", &VnvHeap::config)
      .def_property_readonly("persist_sequence", &VnvHeap::persist_sequence);

  py::class_<EnergyModel>(m, "EnergyModel")
      .def(py::init([](double power_mw, double word_latency_us) { return EnergyModel{power_mw, word_latency_us}; }),
           py::arg("power_mw") = 132.0, py::arg("word_latency_us") = 1.0)
      .def_readwrite("power_mw", &EnergyModel::power_mw)
      .def_readwrite("word_latency_us", &EnergyModel::word_latency_us);

  m.def("persist_bound", &persist_bound, py::arg("config"));
  m.def("wcec_mj", &wcec_mj, py::arg("words"), py::arg("model") = EnergyModel{});

  auto b = m.def_submodule("bench", "Benchmark drivers returning plain dicts");
  b.def(
      "access",
      [](const std::string& which, std::size_t size, const std::string& backend, const EnergyModel& model) {
        return record_dict(bench::run_access_bench(bench::parse_access_case(which), size, backend), model);
      },
      py::arg("case"), py::arg("object_size"), py::arg("backend") = "vnv", py::arg("model") = EnergyModel{});
  b.def(
      "queue",
      [](std::size_t len, const std::string& backend, std::size_t reps, const EnergyModel& model) {
        return record_dict(bench::run_queue_bench(len, backend, reps), model);
      },
      py::arg("initial_len"), py::arg("backend") = "vnv", py::arg("reps") = 64, py::arg("model") = EnergyModel{});
  b.def(
      "persist",
      [](const std::string& mode, std::vector<std::size_t> values, std::uint64_t seed, const EnergyModel& model) {
        const auto m = bench::parse_persist_mode(mode);
        if (values.empty()) values = bench::default_persist_values(m);
        py::list out;
        for (const auto& r : bench::run_persist_bench(m, values, seed)) out.append(record_dict(r, model));
        return out;
      },
      py::arg("mode"), py::arg("values") = std::vector<std::size_t>{}, py::arg("seed") = 1,
      py::arg("model") = EnergyModel{});
  b.def(
      "kvs",
      [](const std::string& backend, std::optional<std::size_t> page, const std::string& pattern,
         std::uint64_t seed, std::size_t ops, const EnergyModel& model) {
        return record_dict(bench::run_kvs_bench(backend, page, parse_pattern(pattern), seed, ops), model);
      },
      py::arg("backend"), py::arg("page_size") = py::none(), py::arg("pattern") = "random", py::arg("seed") = 1,
      py::arg("ops") = bench::kKvsDefaultOps, py::arg("model") = EnergyModel{});
  b.def(
      "crash",
      [](std::uint64_t seed, std::size_t iterations) {
        const auto r = bench::run_crash_suite(seed, iterations);
        py::dict d;
        d["iterations"] = r.iterations;
        d["passed"] = r.passed;
        d["failures"] = r.failures;
        d["fault_caught"] = r.fault_caught;
        d["previous_restored"] = r.previous_restored;
        return d;
      },
      py::arg("seed") = 1, py::arg("iterations") = 100);
  b.def(
      "check",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : bench::run_all_checks(seed)) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
      },
      py::arg("seed") = 1);
}
