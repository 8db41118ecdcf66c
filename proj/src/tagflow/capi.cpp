#include "tagflow/tagflow.h"

#include <cstring>
#include <filesystem>
#include <mutex>
#include <new>
#include <string>

#include "tagflow/config.hpp"
#include "tagflow/error.hpp"
#include "tagflow/log.hpp"
#include "tagflow/pipeline.hpp"
#include "tagflow/volume_io.hpp"

struct tf_config {
    tagflow::PipelineConfig value;
};

struct tf_volume {
    tagflow::AnyVolume value;
};

namespace {

thread_local std::string last_error;

tf_status status_of(tagflow::ErrorKind kind)
{
    switch (kind) {
    case tagflow::ErrorKind::config:
        return TF_ERR_CONFIG;
    case tagflow::ErrorKind::numerical:
        return TF_ERR_NUMERICAL;
    case tagflow::ErrorKind::io:
        return TF_ERR_IO;
    case tagflow::ErrorKind::invalid_argument:
        return TF_ERR_INVALID_ARGUMENT;
    case tagflow::ErrorKind::internal:
        return TF_ERR_INTERNAL;
    }
    return TF_ERR_INTERNAL;
}

template <class Fn>
tf_status guarded(Fn&& fn)
{
    try {
        fn();
        last_error.clear();
        return TF_OK;
    } catch (const tagflow::Error& e) {
        last_error = e.what();
        return status_of(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return TF_ERR_IO;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return TF_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return TF_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown error";
        return TF_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what)
{
    if (!ok)
        tagflow::fail(tagflow::ErrorKind::invalid_argument, what);
}

tf_status copy_out(const std::string& s, char* buf, size_t cap, size_t* needed)
{
    if (needed)
        *needed = s.size() + 1;
    if (buf && cap >= s.size() + 1)
        std::memcpy(buf, s.c_str(), s.size() + 1);
    else if (buf)
        tagflow::fail(tagflow::ErrorKind::invalid_argument, "buffer too small");
    return TF_OK;
}

void ensure_logging()
{
    static std::once_flag once;
    std::call_once(once, tagflow::init_logging);
}

} // namespace

extern "C" {

const char* tf_version(void)
{
    return TAGFLOW_VERSION;
}

const char* tf_last_error(void)
{
    return last_error.c_str();
}

tf_status tf_config_default(tf_config** out)
{
    return guarded([&] {
        require(out != nullptr, "out is NULL");
        *out = new tf_config{};
    });
}

tf_status tf_config_load(const char* path, tf_config** out)
{
    return guarded([&] {
        require(path && out, "path and out must be non-NULL");
        *out = nullptr;
        *out = new tf_config{tagflow::load_config(path)};
    });
}

tf_status tf_config_parse(const char* text, tf_config** out)
{
    return guarded([&] {
        require(text && out, "text and out must be non-NULL");
        *out = nullptr;
        *out = new tf_config{tagflow::parse_config(text)};
    });
}

tf_status tf_config_set(tf_config* config, const char* key, const char* value)
{
    return guarded([&] {
        require(config && key && value, "config, key and value must be non-NULL");
        tagflow::set_config_value(config->value, key, value);
    });
}

tf_status tf_config_get(const tf_config* config, const char* key, char* buf, size_t cap, size_t* needed)
{
    return guarded([&] {
        require(config && key, "config and key must be non-NULL");
        const std::string text = tagflow::serialize_config(config->value);
        const std::string prefix = std::string(key) + " = ";
        std::size_t pos = 0;
        while (pos < text.size()) {
            const std::size_t eol = text.find('\n', pos);
            if (text.compare(pos, prefix.size(), prefix) == 0) {
                copy_out(text.substr(pos + prefix.size(), eol - pos - prefix.size()), buf, cap, needed);
                return;
            }
            pos = eol + 1;
        }
        tagflow::fail(tagflow::ErrorKind::config, std::string("unknown config key: ") + key);
    });
}

tf_status tf_config_serialize(const tf_config* config, char* buf, size_t cap, size_t* needed)
{
    return guarded([&] {
        require(config != nullptr, "config is NULL");
        copy_out(tagflow::serialize_config(config->value), buf, cap, needed);
    });
}

tf_status tf_config_hash(const tf_config* config, char out[17])
{
    return guarded([&] {
        require(config && out, "config and out must be non-NULL");
        const std::string h = tagflow::config_hash(config->value);
        std::memcpy(out, h.c_str(), 17);
    });
}

void tf_config_free(tf_config* config)
{
    delete config;
}

void tf_run_options_init(tf_run_options* options)
{
    if (options)
        *options = tf_run_options{nullptr, 1, 0};
}

tf_status tf_run_stage(const tf_config* config, tf_stage stage, const tf_run_options* options, int* register_calls)
{
    return guarded([&] {
        require(config != nullptr, "config is NULL");
        ensure_logging();
        tagflow::RunOptions run;
        if (options) {
            require(options->jobs >= 1, "jobs must be >= 1");
            if (options->out_dir)
                run.out_dir = options->out_dir;
            run.jobs = options->jobs;
            run.trace = options->trace != 0;
        }
        const tagflow::PipelineConfig& c = config->value;
        switch (stage) {
        case TF_STAGE_PHANTOM:
            tagflow::cmd_phantom(c, run);
            return;
        case TF_STAGE_HARP:
            tagflow::cmd_harp(c, run);
            return;
        case TF_STAGE_REGISTER: {
            const int calls = tagflow::cmd_register(c, run);
            if (register_calls)
                *register_calls = calls;
            return;
        }
        case TF_STAGE_EVALUATE:
            tagflow::cmd_evaluate(c, run);
            return;
        case TF_STAGE_PIPELINE:
            tagflow::cmd_pipeline(c, run);
            return;
        }
        tagflow::fail(tagflow::ErrorKind::invalid_argument, "unknown stage");
    });
}

tf_status tf_volume_read(const char* path, tf_volume** out)
{
    return guarded([&] {
        require(path && out, "path and out must be non-NULL");
        *out = nullptr;
        *out = new tf_volume{tagflow::read_volume(path)};
    });
}

tf_status tf_volume_write(const tf_volume* volume, const char* path)
{
    return guarded([&] {
        require(volume && path, "volume and path must be non-NULL");
        std::visit([&](const auto& v) { tagflow::write_volume(path, v); }, volume->value);
    });
}

tf_status tf_volume_dims(const tf_volume* volume, int dims[3], double spacing[3], double origin[3])
{
    return guarded([&] {
        require(volume != nullptr, "volume is NULL");
        const tagflow::Grid3& g = std::visit([](const auto& v) -> const tagflow::Grid3& { return v.grid(); },
                                             volume->value);
        for (int a = 0; a < 3; ++a) {
            if (dims)
                dims[a] = g.dim(a);
            if (spacing)
                spacing[a] = g.spacing()[a];
            if (origin)
                origin[a] = g.origin()[a];
        }
    });
}

int tf_volume_components(const tf_volume* volume)
{
    if (!volume)
        return 0;
    return std::holds_alternative<tagflow::ScalarVolume>(volume->value) ? 1 : 3;
}

tf_status tf_volume_copy_data(const tf_volume* volume, double* out, size_t count)
{
    return guarded([&] {
        require(volume && out, "volume and out must be non-NULL");
        if (const auto* s = std::get_if<tagflow::ScalarVolume>(&volume->value)) {
            require(count == s->size(), "count does not match the volume");
            std::memcpy(out, s->values().data(), count * sizeof(double));
            return;
        }
        const auto& v = std::get<tagflow::VectorVolume>(volume->value);
        require(count == 3 * v.size(), "count does not match the volume");
        for (std::size_t m = 0; m < v.size(); ++m) {
            out[3 * m] = v[m].x;
            out[3 * m + 1] = v[m].y;
            out[3 * m + 2] = v[m].z;
        }
    });
}

void tf_volume_free(tf_volume* volume)
{
    delete volume;
}

} // extern "C"
