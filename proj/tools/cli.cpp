#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "causalstab/image_io.hpp"
#include "causalstab/observer_io.hpp"
#include "causalstab/synth.hpp"
#include "run_config.hpp"

namespace causalstab::cli
{

namespace
{

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct LengthMismatch : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct GlobalFlags
{
    std::string config;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::string mode;
    std::string dump;
    std::string flow_dir;
    std::string keypoints;
};

RunConfig load(const GlobalFlags& g, json overrides)
{
    if (g.has_seed)
        overrides["seed"] = g.seed;
    if (!g.mode.empty())
        overrides["mode"] = g.mode;
    if (!g.dump.empty())
        overrides["io"]["dump_trajectories"] = g.dump;
    if (!g.flow_dir.empty())
        overrides["io"]["flow_dir"] = g.flow_dir;
    if (!g.keypoints.empty())
        overrides["io"]["keypoints"] = g.keypoints;
    std::optional<fs::path> file;
    if (!g.config.empty())
        file = g.config;
    return load_run_config(file, g.sets, overrides);
}

json io_overrides(const std::string& input, const std::string& output)
{
    json o = json::object();
    if (!input.empty())
        o["io"]["input"] = input;
    if (!output.empty())
        o["io"]["output"] = output;
    return o;
}

std::string frame_name(int index, const char* ext)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%05d%s", index, ext);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream f(path);
    f << text;
    if (!f)
        throw Error(Errc::IoError, "cannot write " + path.string());
}

std::ofstream open_csv(const fs::path& path, const char* header)
{
    std::ofstream f(path);
    if (!f)
        throw Error(Errc::IoError, "cannot write " + path.string());
    f << header << '\n';
    return f;
}

/// A numbered image directory or a headerless gray8 stream.
struct InputSequence
{
    std::vector<fs::path> files;
    fs::path raw;
    int width = 0;
    int height = 0;

    bool is_raw() const { return !raw.empty(); }
};

InputSequence open_input(const std::string& input, const IoConfig& io, const char* key = "io.input")
{
    if (input.empty())
        throw Error(Errc::ConfigError, std::string(key) + ": no input given");
    const fs::path path = input;
    std::error_code ec;
    InputSequence seq;
    if (fs::is_directory(path, ec))
    {
        seq.files = list_sequence(path);
        if (seq.files.empty())
            throw Error(Errc::IoError, "no numbered frames in " + path.string());
        const Frame first = read_image(seq.files.front());
        seq.width = first.width;
        seq.height = first.height;
    }
    else if (fs::is_regular_file(path, ec))
    {
        if (io.raw_width <= 0 || io.raw_height <= 0)
            throw Error(Errc::ConfigError, "io.raw_width/io.raw_height: required for raw stream input");
        seq.raw = path;
        seq.width = io.raw_width;
        seq.height = io.raw_height;
    }
    else
    {
        throw Error(Errc::IoError, "input not found: " + path.string());
    }
    return seq;
}

FrameSource make_source(const InputSequence& seq)
{
    if (seq.is_raw())
    {
        auto reader = std::make_shared<RawStreamReader>(seq.raw, seq.width, seq.height);
        return [reader]() { return reader->next(); };
    }
    auto next = std::make_shared<std::size_t>(0);
    return [files = seq.files, next]() -> std::optional<Frame> {
        if (*next >= files.size())
            return std::nullopt;
        const std::size_t i = (*next)++;
        return read_image(files[i], int(i));
    };
}

std::vector<Frame> read_all(const InputSequence& seq)
{
    std::vector<Frame> frames;
    FrameSource src = make_source(seq);
    while (auto f = src())
        frames.push_back(std::move(*f));
    return frames;
}

std::vector<fs::path> flow_files(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw Error(Errc::IoError, "flow directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".flo")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

ordered_json report_document(const PipelineReport& r)
{
    return ordered_json::parse(report_to_json(r));
}

int cmd_stabilize(const RunConfig& cfg, std::ostream& out)
{
    const InputSequence input = open_input(cfg.io.input, cfg.io);
    if (cfg.io.output.empty())
        throw Error(Errc::ConfigError, "io.output: no output given");

    StabilizeOptions opts;
    auto imports = std::make_shared<MotionImports>();
    if (!cfg.io.flow_dir.empty())
        imports->flow_files = flow_files(cfg.io.flow_dir);
    if (!cfg.io.keypoints.empty())
        imports->keypoints = read_keypoint_csv(cfg.io.keypoints, input.width, input.height);
    opts.imports = imports;

    const fs::path output = cfg.io.output;
    fs::create_directories(output);

    std::ofstream traj_csv, motion_csv;
    if (!cfg.io.dump_trajectories.empty())
    {
        const fs::path dump = cfg.io.dump_trajectories;
        fs::create_directories(dump);
        traj_csv = open_csv(dump / "trajectories.csv", "frame,row,col,ox,oy,sx,sy");
        motion_csv = open_csv(dump / "motion.csv", "frame,row,col,dx,dy");
        opts.hook = [&](const TrajectoryRecord& r) {
            write_trajectory_dump(traj_csv, r.frame, r.spec, r.raw, r.smoothed);
            write_grid_dump(motion_csv, r.motion);
        };
    }

    std::ofstream raw_out;
    if (input.is_raw())
    {
        raw_out.open(output / "stabilized.gray", std::ios::binary);
        if (!raw_out)
            throw Error(Errc::IoError, "cannot write " + (output / "stabilized.gray").string());
    }
    FrameSink sink = [&](Frame f) {
        if (input.is_raw())
            append_raw(raw_out, f);
        else
            write_image(output / frame_name(f.index, ".png"), f);
    };

    const PipelineReport report = stabilize(make_source(input), sink, cfg.effective_stab(), opts);
    if (raw_out.is_open() && !raw_out.flush())
        throw Error(Errc::IoError, "cannot write the output stream");

    ordered_json doc = report_document(report);
    doc["config"] = to_json(cfg);
    write_text(output / "report.json", doc.dump(2) + "\n");
    write_text(output / "config.json", to_json(cfg).dump(2) + "\n");
    out << "stabilized " << report.frames << " frames at " << report.measured_fps << " fps -> " << output.string()
        << '\n';
    return 0;
}

int cmd_metrics(const RunConfig& cfg, const std::string& report_path, const std::string& csv_dir, std::ostream& out)
{
    const InputSequence original = open_input(cfg.io.input, cfg.io);
    const InputSequence stabilized = open_input(cfg.io.output, cfg.io, "io.output");
    const std::vector<Frame> a = read_all(original), b = read_all(stabilized);
    if (a.size() != b.size())
        throw LengthMismatch("input has " + std::to_string(a.size()) + " frames, output has " +
                             std::to_string(b.size()));

    const MetricsReport m = compute_metrics(a, b, cfg.metrics());
    ordered_json doc = ordered_json::parse(metrics_to_json(m));
    doc["config"] = to_json(cfg);
    const std::string text = doc.dump(2) + "\n";
    out << text;
    if (!report_path.empty())
        write_text(report_path, text);
    if (!csv_dir.empty())
    {
        fs::create_directories(csv_dir);
        std::ofstream per_frame(fs::path(csv_dir) / "metrics.csv"), spectrum(fs::path(csv_dir) / "spectrum.csv");
        write_metrics_csv(per_frame, m);
        write_spectrum_csv(spectrum, m.trajectory);
        if (!per_frame || !spectrum)
            throw Error(Errc::IoError, "cannot write traces to " + csv_dir);
    }
    return 0;
}

StageDelays parse_stage_sleep(const std::string& text)
{
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        double ms = -1;
        try
        {
            ms = std::stod(item, &used);
        }
        catch (const std::exception&)
        {
            used = 0;
        }
        if (used != item.size() || !(ms >= 0))
            break;
        v.push_back(ms);
    }
    if (v.size() != 3 || std::count(text.begin(), text.end(), ',') != 2)
        throw Error(Errc::ConfigError, "--stage-sleep: expected three non-negative millisecond values a,b,c");
    return {v[0], v[1], v[2]};
}

struct BenchArgs
{
    std::string stage_sleep;
    int frames = 0;
    int width = 1280;
    int height = 720;
    std::string report;
};

int cmd_bench(const RunConfig& cfg, const BenchArgs& args, std::ostream& out)
{
    const StabConfig stab = cfg.effective_stab();
    PipelineReport run, reference;
    if (!args.stage_sleep.empty())
    {
        const StageDelays d = parse_stage_sleep(args.stage_sleep);
        const int frames = args.frames > 0 ? args.frames : 300;
        run = run_sleep_harness(frames, d, stab.queues, stab.mode);
        reference = run_sleep_harness(frames, d, stab.queues, ExecMode::Sequential);
    }
    else
    {
        const int frames = args.frames > 0 ? args.frames : 30;
        SceneConfig sc;
        sc.width = args.width;
        sc.height = args.height;
        sc.seed = cfg.seed;
        sc.squares = std::max(600, 600 * args.width * args.height / (160 * 120));
        TrajectoryConfig tc;
        tc.seed = cfg.seed;
        const SynthSequence seq =
            render_sequence(make_scene(sc), gen_trajectory(tc, frames), stab.grid(sc.width, sc.height));
        auto run_mode = [&](ExecMode mode) {
            std::size_t next = 0;
            FrameSource source = [&]() -> std::optional<Frame> {
                if (next >= seq.frames.size())
                    return std::nullopt;
                return seq.frames[next++];
            };
            StabConfig c = stab;
            c.mode = mode;
            return stabilize(source, [](Frame) {}, c);
        };
        run = run_mode(stab.mode);
        reference = run_mode(ExecMode::Sequential);
    }
    run.speedup_measured = run.wall_time > 0 ? reference.wall_time / run.wall_time : 0.0;
    reference.speedup_measured = 1.0;

    ordered_json doc = report_document(run);
    doc["reference"] = report_document(reference);
    doc["config"] = to_json(cfg);
    const std::string text = doc.dump(2) + "\n";
    out << text;
    if (!args.report.empty())
        write_text(args.report, text);
    return 0;
}

struct SynthArgs
{
    int frames = 120;
    int width = 160;
    int height = 120;
    int margin = 40;
    std::string jitter = "alternating";
    double amplitude = 2.0;
    bool two_plane = false;
    double disparity = 1.0;
};

int cmd_synth(const RunConfig& cfg, const SynthArgs& args, std::ostream& out)
{
    if (cfg.io.output.empty())
        throw Error(Errc::ConfigError, "io.output: no output given");
    TrajectoryConfig tc;
    tc.seed = cfg.seed;
    tc.jitter_amplitude = args.amplitude;
    if (args.jitter == "alternating")
        tc.jitter = JitterProfile::Alternating;
    else if (args.jitter == "highband")
        tc.jitter = JitterProfile::HighBand;
    else
        throw Error(Errc::ConfigError, "--jitter: expected alternating or highband, got '" + args.jitter + "'");
    SceneConfig sc;
    sc.width = args.width;
    sc.height = args.height;
    sc.margin = args.margin;
    sc.seed = cfg.seed;
    if (args.two_plane)
    {
        sc.plane_boundary = args.width / 2.0;
        sc.disparity_x = args.disparity;
    }
    const SynthTrajectory traj = gen_trajectory(tc, args.frames);
    const SynthSequence seq = render_sequence(make_scene(sc), traj, cfg.stab.grid(sc.width, sc.height));

    const fs::path output = cfg.io.output;
    fs::create_directories(output);
    for (const Frame& f : seq.frames)
        write_image(output / frame_name(f.index, ".png"), f);
    std::ofstream poses = open_csv(output / "trajectory.csv", "frame,tx,ty,rotation,scale,jitter_tx,jitter_ty");
    for (int t = 0; t < traj.frames(); ++t)
    {
        const PathPose p = traj.total(t);
        const PathPose& j = traj.jitter[std::size_t(t)];
        poses << t << ',' << p.tx << ',' << p.ty << ',' << p.rotation << ',' << p.scale << ',' << j.tx << ',' << j.ty
              << '\n';
    }
    std::ofstream motion = open_csv(output / "motion.csv", "frame,row,col,dx,dy");
    for (const auto& dg : seq.motion)
        write_grid_dump(motion, dg);
    if (!poses || !motion)
        throw Error(Errc::IoError, "cannot write ground truth to " + output.string());
    out << "wrote " << seq.frames.size() << " frames -> " << output.string() << '\n';
    return 0;
}

int exit_code(Errc code)
{
    switch (code)
    {
    case Errc::ConfigError:
    case Errc::InvalidArgument:
    case Errc::ViewportUnderflow:
        return 2;
    case Errc::IoError:
    case Errc::SourceError:
    case Errc::SinkError:
    case Errc::TooShort:
        return 3;
    default:
        return 1;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Causal online video stabilization", "causalstab"};
    app.require_subcommand(1);

    GlobalFlags g;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--set", g.sets, "Override a configuration key, e.g. smoother.window=9 (repeatable)")
        ->allow_extra_args(false);
    auto* seed = app.add_option("--seed", g.seed, "Seed for every randomised component");
    app.add_option("--mode", g.mode, "pipeline or sequential");
    app.add_option("--dump-trajectories", g.dump, "Directory for per-vertex trajectory and motion CSV dumps");
    app.add_option("--flow-dir", g.flow_dir, "Directory of .flo files replacing the dense flow");
    app.add_option("--keypoints", g.keypoints, "Keypoint CSV replacing the builtin detectors");

    std::string input, output;
    auto* stab = app.add_subcommand("stabilize", "Stabilize a frame directory or raw gray8 stream");
    stab->fallthrough();
    stab->add_option("--input", input, "Frame directory or raw stream");
    stab->add_option("--output", output, "Output directory");

    std::string metrics_report, metrics_csv;
    auto* metrics = app.add_subcommand("metrics", "Cropping, distortion, stability and PSNR of a stabilized sequence");
    metrics->fallthrough();
    metrics->add_option("--input", input, "Original frames");
    metrics->add_option("--output", output, "Stabilized frames");
    metrics->add_option("--report", metrics_report, "Also write the JSON report here");
    metrics->add_option("--csv", metrics_csv, "Directory for per-frame and spectrum CSV traces");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Measured against predicted pipeline throughput");
    bench->fallthrough();
    bench->add_option("--stage-sleep", bench_args.stage_sleep, "Per-stage sleep in ms, e.g. 10,10,10");
    bench->add_option("--frames", bench_args.frames, "Frame count (300 with --stage-sleep, else 30)");
    bench->add_option("--width", bench_args.width, "Synthetic frame width");
    bench->add_option("--height", bench_args.height, "Synthetic frame height");
    bench->add_option("--report", bench_args.report, "Also write the JSON report here");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Render a synthetic jittered sequence with ground truth");
    synth->fallthrough();
    synth->add_option("--output", output, "Output directory");
    synth->add_option("--frames", synth_args.frames, "Frame count");
    synth->add_option("--width", synth_args.width, "Frame width");
    synth->add_option("--height", synth_args.height, "Frame height");
    synth->add_option("--margin", synth_args.margin, "Texture margin around the viewport");
    synth->add_option("--jitter", synth_args.jitter, "alternating or highband");
    synth->add_option("--amplitude", synth_args.amplitude, "Jitter amplitude in pixels");
    synth->add_flag("--two-plane", synth_args.two_plane, "Right half moves with extra disparity");
    synth->add_option("--disparity", synth_args.disparity, "Per-frame disparity of the second plane");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 2;
    }
    g.has_seed = seed->count() > 0;

    try
    {
        const RunConfig cfg = load(g, io_overrides(input, output));
        if (stab->parsed())
            return cmd_stabilize(cfg, out);
        if (metrics->parsed())
            return cmd_metrics(cfg, metrics_report, metrics_csv, out);
        if (bench->parsed())
            return cmd_bench(cfg, bench_args, out);
        return cmd_synth(cfg, synth_args, out);
    }
    catch (const LengthMismatch& e)
    {
        err << "error: " << e.what() << '\n';
        return 4;
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << '\n';
        return exit_code(e.code());
    }
    catch (const fs::filesystem_error& e)
    {
        err << "error: " << e.what() << '\n';
        return 3;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace causalstab::cli
