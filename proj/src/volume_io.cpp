#include "mqc/volume_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "json.hpp"

namespace mqc {

namespace {

using nlohmann::json;

constexpr const char* kMagic = "mqcvol1";

std::string header_line(const json& j) { return j.dump() + "\n"; }

void write_file(const std::string& path, const std::string& header, const void* payload,
                std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
    if (!out) throw IoError("short write: " + path);
}

json read_header(std::ifstream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("missing header line: " + path);
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw FormatError("corrupt header in " + path + ": " + e.what());
    }
    if (!j.contains("magic") || j["magic"] != kMagic)
        throw FormatError("not a portable volume file: " + path);
    return j;
}

GridSize shape_from(const json& j, const std::string& path) {
    const auto& s = j.at("shape");
    if (!s.is_array() || s.size() != 3) throw FormatError("bad shape in header: " + path);
    GridSize g{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()};
    if (g.z <= 0 || g.y <= 0 || g.x <= 0) throw FormatError("non-positive shape: " + path);
    return g;
}

Spacing spacing_from(const json& j, const std::string& path) {
    const auto& s = j.at("spacing");
    if (!s.is_array() || s.size() != 3) throw FormatError("bad spacing in header: " + path);
    return Spacing{s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
}

template <typename T>
std::vector<T> read_payload(std::ifstream& in, const json& j, const GridSize& shape,
                            const std::string& path) {
    const auto expected = shape.voxels() * sizeof(T);
    const auto declared = j.at("payload_bytes").get<std::uint64_t>();
    if (declared != expected)
        throw FormatError("header payload_bytes does not match shape: " + path);
    std::vector<T> data(shape.voxels());
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(expected));
    if (static_cast<std::uint64_t>(in.gcount()) != expected)
        throw FormatError("payload shorter than header promises: " + path);
    char extra;
    if (in.read(&extra, 1)) throw FormatError("trailing bytes after payload: " + path);
    return data;
}

// --- NIfTI-1 ingestion -----------------------------------------------------

#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
void byteswap(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

std::vector<char> read_whole_file(const std::string& path) {
    // gzread handles both gzip and plain files.
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    std::vector<char> buf;
    char chunk[1 << 16];
    int n;
    while ((n = gzread(f, chunk, sizeof(chunk))) > 0)
        buf.insert(buf.end(), chunk, chunk + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad) throw FormatError("gzip stream error in: " + path);
    return buf;
}

template <typename T>
float fetch_as_float(const char* p, std::size_t i, bool swap) {
    T v;
    std::memcpy(&v, p + i * sizeof(T), sizeof(T));
    if (swap) byteswap(v);
    return static_cast<float>(v);
}

Volume load_nifti(const std::string& path) {
    const auto bytes = read_whole_file(path);
    if (bytes.size() < sizeof(NiftiHeader)) throw FormatError("file too small for NIfTI: " + path);
    NiftiHeader h;
    std::memcpy(&h, bytes.data(), sizeof(h));
    bool swap = false;
    if (h.sizeof_hdr != 348) {
        byteswap(h.sizeof_hdr);
        if (h.sizeof_hdr != 348) throw FormatError("bad NIfTI sizeof_hdr: " + path);
        swap = true;
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        throw FormatError("missing NIfTI magic: " + path);
    if (swap) {
        for (auto& d : h.dim) byteswap(d);
        for (auto& p : h.pixdim) byteswap(p);
        byteswap(h.datatype);
        byteswap(h.vox_offset);
        byteswap(h.scl_slope);
        byteswap(h.scl_inter);
    }
    if (h.dim[0] < 3) throw FormatError("NIfTI volume must be at least 3D: " + path);
    for (int d = 4; d <= h.dim[0]; ++d)
        if (h.dim[d] > 1) throw FormatError("NIfTI with >3 non-trivial dims unsupported: " + path);

    Volume v;
    // NIfTI stores x fastest; the grid is (z, y, x).
    v.shape = GridSize{h.dim[3], h.dim[2], h.dim[1]};
    v.spacing = Spacing{h.pixdim[3], h.pixdim[2], h.pixdim[1]};
    v.id = path;
    const auto n = v.shape.voxels();
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    const char* payload = bytes.data() + offset;

    std::size_t elem = 0;
    switch (h.datatype) {
        case 2: elem = 1; break;   // uint8
        case 4: elem = 2; break;   // int16
        case 8: elem = 4; break;   // int32
        case 16: elem = 4; break;  // float32
        case 64: elem = 8; break;  // float64
        case 512: elem = 2; break; // uint16
        default: throw FormatError("unsupported NIfTI datatype " + std::to_string(h.datatype));
    }
    if (bytes.size() < offset + n * elem)
        throw FormatError("NIfTI payload shorter than header dims promise: " + path);

    v.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        float val;
        switch (h.datatype) {
            case 2: val = fetch_as_float<std::uint8_t>(payload, i, swap); break;
            case 4: val = fetch_as_float<std::int16_t>(payload, i, swap); break;
            case 8: val = fetch_as_float<std::int32_t>(payload, i, swap); break;
            case 16: val = fetch_as_float<float>(payload, i, swap); break;
            case 64: val = fetch_as_float<double>(payload, i, swap); break;
            default: val = fetch_as_float<std::uint16_t>(payload, i, swap); break;
        }
        if (h.scl_slope != 0.0f) val = val * h.scl_slope + h.scl_inter;
        v.data[i] = val;
    }
    v.validate();
    return v;
}

} // namespace

VolumeFormat guess_format(const std::string& path) {
    const auto ends_with = [&](const char* suf) {
        const std::size_t n = std::strlen(suf);
        return path.size() >= n && path.compare(path.size() - n, n, suf) == 0;
    };
    if (ends_with(".nii") || ends_with(".nii.gz")) return VolumeFormat::nifti;
    return VolumeFormat::portable;
}

Volume load_volume(const std::string& path, VolumeFormat format) {
    if (format == VolumeFormat::nifti) return load_nifti(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const json j = read_header(in, path);
    if (j.at("dtype") != "float32") throw FormatError("expected float32 payload: " + path);
    Volume v;
    v.shape = shape_from(j, path);
    v.spacing = spacing_from(j, path);
    v.id = j.value("id", "");
    v.data = read_payload<float>(in, j, v.shape, path);
    v.validate();
    return v;
}

void save_volume(const Volume& v, const std::string& path) {
    v.validate();
    json j;
    j["magic"] = kMagic;
    j["dtype"] = "float32";
    j["shape"] = {v.shape.z, v.shape.y, v.shape.x};
    j["spacing"] = {v.spacing.z, v.spacing.y, v.spacing.x};
    j["id"] = v.id;
    j["payload_bytes"] = v.shape.voxels() * sizeof(float);
    write_file(path, header_line(j), v.data.data(), v.data.size() * sizeof(float));
}

Mask load_mask(const std::string& path, VolumeFormat format) {
    if (format == VolumeFormat::nifti) {
        const Volume v = load_nifti(path);
        Mask m;
        m.shape = v.shape;
        m.spacing = v.spacing;
        m.id = v.id;
        m.data.resize(v.data.size());
        for (std::size_t i = 0; i < v.data.size(); ++i) {
            const float f = v.data[i];
            if (f < 0.0f || f > 255.0f || f != static_cast<float>(static_cast<int>(f)))
                throw FormatError("NIfTI label values must be integers in [0,255]: " + path);
            m.data[i] = static_cast<std::uint8_t>(f);
        }
        return m;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const json j = read_header(in, path);
    if (j.at("dtype") != "uint8") throw FormatError("expected uint8 payload: " + path);
    Mask m;
    m.shape = shape_from(j, path);
    m.spacing = spacing_from(j, path);
    m.id = j.value("id", "");
    m.class_id = j.value("class_id", 0);
    m.data = read_payload<std::uint8_t>(in, j, m.shape, path);
    m.validate();
    return m;
}

void save_mask(const Mask& m, const std::string& path) {
    m.validate();
    json j;
    j["magic"] = kMagic;
    j["dtype"] = "uint8";
    j["shape"] = {m.shape.z, m.shape.y, m.shape.x};
    j["spacing"] = {m.spacing.z, m.spacing.y, m.spacing.x};
    j["id"] = m.id;
    j["class_id"] = m.class_id;
    j["payload_bytes"] = m.shape.voxels();
    write_file(path, header_line(j), m.data.data(), m.data.size());
}

} // namespace mqc
