//! `fw` — work with AFW1 firmware update containers: inspect, verify,
//! patch, resign, analyze for load addresses, attach/check MAC
//! trailers, generate test fixtures, and run the update-channel attack
//! demo.
//!
//! Output conventions: integers print as lowercase `0x`-prefixed hex,
//! fixed width per field size; integer arguments parse as decimal or
//! `0x`-hex.  Exit codes follow each command's verdict: `verify` exits
//! 0/1 for accept/reject, `mac verify` 0/1/2 for valid/missing/
//! mismatch, `vote-base` 1 when no base reaches the vote threshold,
//! `demo attack` 0 only when the mode's expected outcome occurred.
//! Operational failures (unreadable files, malformed input) exit 2 —
//! except under `mac verify`, where 2 is taken, so they exit 3 there.

use std::path::PathBuf;
use std::process::ExitCode;

use afw::baseaddr::{detect_strings, estimate_base, vote_base, CandidateRange};
use afw::container::{parse_update, serialize_update, ImageEntry, ImageRole};
use afw::crc32::crc32;
use afw::mac::{attach_mac, split_trailer, verify_mac, MacStatus};
use afw::patch::{patch_bytes, resign, set_version};
use afw::verify::{verify, VerificationReport, VerifyPolicy};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use fw::demo::{run_attack_demo, DemoOptions};
use fw::fixture::{gen_blob, gen_update_bytes, FixtureSpec};
use fw::hexutil::{parse_hex_bytes, parse_u32, parse_u64, read_key_file};
use serde::Serialize;

/// Print a line to stdout, exiting quietly if the pipe closed (e.g.
/// `fw strings blob | head`) the way standard Unix tools do, instead
/// of panicking on EPIPE.
fn say(args: std::fmt::Arguments) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if out.write_fmt(args).and_then(|()| out.write_all(b"\n")).is_err() {
        std::process::exit(0);
    }
}

macro_rules! say {
    () => { crate::say(format_args!("")) };
    ($($t:tt)*) => { crate::say(format_args!($($t)*)) };
}

#[derive(Parser)]
#[command(
    name = "fw",
    version,
    about = "AFW1 firmware container toolkit: inspect, verify, patch, resign, \
             analyze, and demo the update-channel attack"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the header table of an update file, field by field.
    Inspect {
        file: PathBuf,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// CRC-32 of a file's raw bytes.
    Crc { file: PathBuf },
    /// Run the tracker's acceptance checks against an update file.
    Verify {
        file: PathBuf,
        /// Hex key file; enables the checksum+MAC policy.
        #[arg(long, value_name = "HEXFILE")]
        mac_key: Option<PathBuf>,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Modify an image's version field or payload bytes.
    ///
    /// The result is written WITHOUT updating any checksum, so `verify`
    /// rejects it until `resign` is run — the two steps of the attack
    /// are kept separate on purpose.
    Patch {
        file: PathBuf,
        /// Which image to modify.
        #[arg(long, value_enum)]
        image: ImageArg,
        /// New version value for that image.
        #[arg(long, value_name = "U32", value_parser = parse_u32)]
        set_version: Option<u32>,
        /// Overwrite payload bytes: an offset within the image payload
        /// and the replacement bytes as hex.
        #[arg(long, num_args = 2, value_names = ["OFFSET", "HEXBYTES"])]
        write: Option<Vec<String>>,
        /// Output path (default: overwrite the input).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recompute every checksum of an update file — the attack step
    /// that makes any modification pass checksum-only verification.
    Resign {
        file: PathBuf,
        /// Output path (default: overwrite the input).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List NUL-terminated printable-ASCII strings in a blob.
    Strings {
        blob: PathBuf,
        /// Minimum string length to report.
        #[arg(long, default_value_t = 5)]
        min_len: usize,
    },
    /// Rank candidate load addresses for a firmware blob by how many
    /// aligned words resolve to detected string starts.
    ScanBase {
        blob: PathBuf,
        /// First candidate base.
        #[arg(long, value_parser = parse_u64, default_value = "0x0")]
        start: u64,
        /// End of the candidate range (exclusive).
        #[arg(long, value_parser = parse_u64, default_value = "0x80000")]
        end: u64,
        /// Candidate grid step.
        #[arg(long, value_parser = parse_u64, default_value = "0x1000")]
        stride: u64,
        /// How many candidates to print.
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, default_value_t = 5)]
        min_len: usize,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Recover a load address without a candidate grid: every
    /// word/string pair votes for a base; the modal base wins.
    VoteBase {
        blob: PathBuf,
        /// Votes required for a result; exits 1 if no base reaches it.
        #[arg(long, default_value_t = 10)]
        min_votes: usize,
        #[arg(long, default_value_t = 5)]
        min_len: usize,
    },
    /// Attach or check the HMAC-SHA-256 trailer.
    Mac {
        #[command(subcommand)]
        action: MacAction,
    },
    /// Run the end-to-end update-channel scenarios.
    Demo {
        #[command(subcommand)]
        scenario: DemoScenario,
    },
    /// Generate deterministic test fixtures.
    GenFixture {
        #[command(subcommand)]
        what: Fixture,
    },
}

#[derive(Subcommand)]
enum MacAction {
    /// Append a MAC trailer computed with the given key.
    Attach {
        file: PathBuf,
        /// Hex key file (64 hex digits).
        #[arg(long, value_name = "HEXFILE")]
        key: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check the MAC trailer.  Exit code: 0 valid, 1 missing,
    /// 2 mismatch (operational errors exit 3).
    Verify {
        file: PathBuf,
        /// Hex key file (64 hex digits).
        #[arg(long, value_name = "HEXFILE")]
        key: PathBuf,
    },
}

#[derive(Subcommand)]
enum DemoScenario {
    /// Spin up vendor, interceptor, PCD and tracker on loopback, run
    /// one sync through the interceptor, and print the transcript.
    /// Exits 0 only on the mode's expected outcome: forged firmware
    /// installed without the countermeasure, rejected with it.
    Attack {
        /// Enable a tracker-side countermeasure ("mac": require a
        /// valid HMAC-SHA-256 trailer).
        #[arg(long, value_enum, value_name = "SCHEME")]
        countermeasure: Option<Countermeasure>,
        /// Vendor publishes no update; the interceptor fakes one.
        #[arg(long)]
        fake_availability: bool,
        /// Seed for the deterministic firmware fixtures.
        #[arg(long, value_parser = parse_u64, default_value = "1")]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Countermeasure {
    Mac,
}

#[derive(Subcommand)]
enum Fixture {
    /// A firmware-like blob with planted strings and absolute
    /// references; prints the ground truth record as JSON.
    Blob {
        #[arg(long, value_parser = parse_u64, default_value = "1")]
        seed: u64,
        /// Blob size in bytes.
        #[arg(long, value_parser = parse_u64, default_value = "4096")]
        size: u64,
        /// Number of planted strings.
        #[arg(long, default_value_t = 20)]
        strings: usize,
        /// Number of planted references to string starts.
        #[arg(long, default_value_t = 30)]
        refs: usize,
        /// Load address the references assume.
        #[arg(long, value_parser = parse_u32, default_value = "0x18000")]
        base: u32,
        /// Where to write the blob.
        #[arg(short, long)]
        output: PathBuf,
        /// Write the ground truth JSON here instead of stdout.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// A valid AFW1 update file with synthetic payloads.
    Update {
        #[arg(long, value_parser = parse_u64, default_value = "1")]
        seed: u64,
        #[arg(long, value_parser = parse_u64, default_value = "4096")]
        app_size: u64,
        #[arg(long, value_parser = parse_u64, default_value = "1024")]
        boot_size: u64,
        #[arg(long, value_parser = parse_u32, default_value = "2")]
        app_version: u32,
        #[arg(long, value_parser = parse_u32, default_value = "1")]
        boot_version: u32,
        /// Where to write the update file.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageArg {
    App,
    Boot,
}

impl From<ImageArg> for ImageRole {
    fn from(arg: ImageArg) -> ImageRole {
        match arg {
            ImageArg::App => ImageRole::App,
            ImageArg::Boot => ImageRole::Boot,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // `mac verify` uses exit code 2 for a verdict, so its operational
    // failures move to 3; everywhere else they are 2.
    let failure_code = match &cli.command {
        Command::Mac { action: MacAction::Verify { .. } } => 3,
        _ => 2,
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure_code)
        }
    }
}

fn read_file(path: &PathBuf) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {} ({} bytes)", path.display(), bytes.len());
    Ok(())
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Inspect { file, json } => inspect(&file, json),
        Command::Crc { file } => {
            say!("0x{:08x}", crc32(&read_file(&file)?));
            Ok(0)
        }
        Command::Verify { file, mac_key, json } => verify_cmd(&file, mac_key.as_ref(), json),
        Command::Patch { file, image, set_version, write, output } => {
            patch_cmd(&file, image.into(), set_version, write, output)
        }
        Command::Resign { file, output } => {
            let bytes = read_file(&file)?;
            let update =
                parse_update(&bytes).with_context(|| format!("parsing {}", file.display()))?;
            let resigned = serialize_update(&resign(&update))
                .context("serializing the resigned update")?;
            write_file(&output.unwrap_or(file), &resigned)?;
            Ok(0)
        }
        Command::Strings { blob, min_len } => {
            let bytes = read_file(&blob)?;
            for s in detect_strings(&bytes, min_len) {
                let text = std::str::from_utf8(&bytes[s.offset..s.offset + s.length])
                    .expect("detected strings are printable ASCII");
                say!("0x{:08x}  {:4}  {}", s.offset, s.length, text);
            }
            Ok(0)
        }
        Command::ScanBase { blob, start, end, stride, top, min_len, json } => {
            scan_base(&blob, CandidateRange { start, end, stride }, top, min_len, json)
        }
        Command::VoteBase { blob, min_votes, min_len } => {
            let bytes = read_file(&blob)?;
            match vote_base(&bytes, min_len, min_votes) {
                Some(vote) => {
                    say!("0x{:08x}  score={}", vote.base, vote.votes);
                    Ok(0)
                }
                None => {
                    eprintln!("no base reached {min_votes} votes");
                    Ok(1)
                }
            }
        }
        Command::Mac { action } => mac_cmd(action),
        Command::Demo { scenario } => demo_cmd(scenario),
        Command::GenFixture { what } => gen_fixture(what),
    }
}

// ---- inspect ----------------------------------------------------------

#[derive(Serialize)]
struct ImageJson {
    identifier: u16,
    role: &'static str,
    reserved: u16,
    offset: u32,
    length: u32,
    checksum: u32,
    checksum_computed: u32,
    checksum_ok: bool,
    version: u32,
}

#[derive(Serialize)]
struct InspectJson {
    file_len: u64,
    mac_trailer: bool,
    table_ver: u16,
    table_len: u16,
    images: Vec<ImageJson>,
    table_checksum: u32,
    table_checksum_computed: u32,
    table_checksum_ok: bool,
}

fn checksum_note(stored: u32, computed: u32) -> String {
    let status = if stored == computed { "ok" } else { "MISMATCH" };
    format!("0x{stored:08x} (computed 0x{computed:08x}, {status})")
}

fn inspect(file: &PathBuf, json: bool) -> Result<u8> {
    let bytes = read_file(file)?;
    let update = parse_update(&bytes).with_context(|| format!("parsing {}", file.display()))?;
    let header = &update.header;
    let table_computed = crc32(&bytes[..44]);
    let has_trailer = split_trailer(&bytes).is_some();

    let image_info = |entry: &ImageEntry| {
        let role = ImageRole::from_identifier(entry.identifier)
            .expect("parse admits only known identifiers");
        (role, crc32(update.payload(role)))
    };

    if json {
        let images = header
            .images
            .iter()
            .map(|entry| {
                let (role, computed) = image_info(entry);
                ImageJson {
                    identifier: entry.identifier,
                    role: role.name(),
                    reserved: entry.reserved,
                    offset: entry.offset,
                    length: entry.length,
                    checksum: entry.checksum,
                    checksum_computed: computed,
                    checksum_ok: entry.checksum == computed,
                    version: entry.version,
                }
            })
            .collect();
        let doc = InspectJson {
            file_len: bytes.len() as u64,
            mac_trailer: has_trailer,
            table_ver: header.table_ver,
            table_len: header.table_len,
            images,
            table_checksum: header.table_checksum,
            table_checksum_computed: table_computed,
            table_checksum_ok: header.table_checksum == table_computed,
        };
        say!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(0);
    }

    let mut rows: Vec<(usize, usize, String, String)> = vec![
        (0, 2, "table_ver".into(), header.table_ver.to_string()),
        (2, 2, "table_len".into(), header.table_len.to_string()),
    ];
    for (i, entry) in header.images.iter().enumerate() {
        let (role, computed) = image_info(entry);
        let at = 4 + i * 20;
        rows.push((at, 2, format!("images[{i}].identifier"), format!("{} ({})", entry.identifier, role.name())));
        rows.push((at + 2, 2, format!("images[{i}].reserved"), entry.reserved.to_string()));
        rows.push((at + 4, 4, format!("images[{i}].offset"), entry.offset.to_string()));
        rows.push((at + 8, 4, format!("images[{i}].length"), entry.length.to_string()));
        rows.push((at + 12, 4, format!("images[{i}].checksum"), checksum_note(entry.checksum, computed)));
        rows.push((at + 16, 4, format!("images[{i}].version"), format!("0x{:08x}", entry.version)));
    }
    rows.push((44, 4, "table_checksum".into(), checksum_note(header.table_checksum, table_computed)));

    say!("{:<5}{:<6}{:<22}{}", "off", "size", "field", "value");
    for (off, size, field, value) in rows {
        say!("{off:<5}{size:<6}{field:<22}{value}");
    }
    say!(
        "file: {} bytes; mac trailer: {}",
        bytes.len(),
        if has_trailer { "present" } else { "none" }
    );
    Ok(0)
}

// ---- verify -----------------------------------------------------------

#[derive(Serialize)]
struct VerifyJson {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    app_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boot_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cause: Option<String>,
}

fn verify_cmd(file: &PathBuf, mac_key: Option<&PathBuf>, json: bool) -> Result<u8> {
    let bytes = read_file(file)?;
    let policy = match mac_key {
        Some(path) => VerifyPolicy::ChecksumAndMac { key: read_key_file(path)? },
        None => VerifyPolicy::ChecksumOnly,
    };
    let report = verify(&bytes, &policy);
    if json {
        let doc = match &report {
            VerificationReport::Accept { app_version, boot_version } => VerifyJson {
                verdict: "accept",
                app_version: Some(*app_version),
                boot_version: Some(*boot_version),
                cause: None,
            },
            VerificationReport::Reject(cause) => VerifyJson {
                verdict: "reject",
                app_version: None,
                boot_version: None,
                cause: Some(cause.to_string()),
            },
        };
        say!("{}", serde_json::to_string(&doc)?);
    } else {
        match &report {
            VerificationReport::Accept { app_version, boot_version } => {
                say!("ACCEPT app=0x{app_version:08x} boot=0x{boot_version:08x}");
            }
            VerificationReport::Reject(cause) => say!("REJECT {cause}"),
        }
    }
    Ok(if report.is_accept() { 0 } else { 1 })
}

// ---- patch ------------------------------------------------------------

fn patch_cmd(
    file: &PathBuf,
    image: ImageRole,
    version: Option<u32>,
    write: Option<Vec<String>>,
    output: Option<PathBuf>,
) -> Result<u8> {
    if version.is_none() && write.is_none() {
        bail!("nothing to do: pass --set-version and/or --write");
    }
    let bytes = read_file(file)?;
    let mut update =
        parse_update(&bytes).with_context(|| format!("parsing {}", file.display()))?;
    if let Some(args) = write {
        let at = parse_u32(&args[0]).map_err(anyhow::Error::msg)?;
        let data = parse_hex_bytes(&args[1])?;
        update = patch_bytes(&update, image, at, &data).with_context(|| {
            format!("writing {} bytes at payload offset {at}", data.len())
        })?;
    }
    if let Some(v) = version {
        update = set_version(&update, image, v);
    }
    let out = serialize_update(&update).context("serializing the patched update")?;
    write_file(&output.unwrap_or_else(|| file.clone()), &out)?;
    Ok(0)
}

// ---- scan-base --------------------------------------------------------

#[derive(Serialize)]
struct CandidateJson {
    base: u32,
    score: usize,
    rank: usize,
}

fn scan_base(
    blob: &PathBuf,
    range: CandidateRange,
    top: usize,
    min_len: usize,
    json: bool,
) -> Result<u8> {
    let bytes = read_file(blob)?;
    let candidates = estimate_base(&bytes, range, min_len)
        .map_err(|e| anyhow::Error::msg(e.to_string()))?;
    if json {
        let doc: Vec<CandidateJson> = candidates
            .iter()
            .take(top)
            .map(|c| CandidateJson { base: c.base, score: c.score, rank: c.rank })
            .collect();
        say!("{}", serde_json::to_string(&doc)?);
    } else {
        for c in candidates.iter().take(top) {
            say!("0x{:08x}  score={}", c.base, c.score);
        }
    }
    Ok(0)
}

// ---- mac --------------------------------------------------------------

fn mac_cmd(action: MacAction) -> Result<u8> {
    match action {
        MacAction::Attach { file, key, output } => {
            let bytes = read_file(&file)?;
            let key = read_key_file(&key)?;
            let tagged = attach_mac(&bytes, &key)
                .map_err(|e| anyhow::Error::msg(e.to_string()))
                .with_context(|| format!("attaching MAC to {}", file.display()))?;
            write_file(&output, &tagged)?;
            Ok(0)
        }
        MacAction::Verify { file, key } => {
            let bytes = read_file(&file)?;
            let key = read_key_file(&key)?;
            match verify_mac(&bytes, &key) {
                MacStatus::Valid => {
                    say!("VALID");
                    Ok(0)
                }
                MacStatus::Missing => {
                    say!("MISSING");
                    Ok(1)
                }
                MacStatus::Mismatch => {
                    say!("MISMATCH");
                    Ok(2)
                }
            }
        }
    }
}

// ---- demo -------------------------------------------------------------

fn demo_cmd(scenario: DemoScenario) -> Result<u8> {
    let DemoScenario::Attack { countermeasure, fake_availability, seed } = scenario;
    let options = DemoOptions {
        countermeasure_mac: matches!(countermeasure, Some(Countermeasure::Mac)),
        fake_availability,
        seed,
    };
    say!(
        "mode: {}; policy: {}; seed: {}",
        if options.fake_availability { "fake-availability" } else { "swap-firmware" },
        if options.countermeasure_mac { "checksum+mac" } else { "checksum-only" },
        options.seed,
    );
    say!();
    let report = run_attack_demo(&options)?;
    for line in &report.lines {
        say!("{line}");
    }
    say!();
    say!("outcome: {}", describe_outcome(&report.sync.outcome));
    say!(
        "verdict: {} outcome for this mode",
        if report.outcome_as_expected { "expected" } else { "UNEXPECTED" }
    );
    Ok(if report.outcome_as_expected { 0 } else { 1 })
}

fn describe_outcome(outcome: &fw::channel::SyncOutcome) -> String {
    use fw::channel::SyncOutcome;
    match outcome {
        SyncOutcome::UpToDate => "up to date, nothing installed".into(),
        SyncOutcome::Installed { app, boot } => {
            format!("installed (app=0x{app:08x} boot=0x{boot:08x})")
        }
        SyncOutcome::Rejected(Some(cause)) => format!("rejected ({cause})"),
        SyncOutcome::Rejected(None) => "rejected (unspecified cause)".into(),
        SyncOutcome::TransportError(e) => format!("transport error: {e}"),
    }
}

// ---- gen-fixture ------------------------------------------------------

fn gen_fixture(what: Fixture) -> Result<u8> {
    match what {
        Fixture::Blob { seed, size, strings, refs, base, output, truth } => {
            let spec = FixtureSpec {
                seed,
                size: size.try_into().context("--size does not fit in memory")?,
                n_strings: strings,
                n_refs: refs,
                base,
            };
            let (blob, ground_truth) = gen_blob(&spec)
                .map_err(|e| anyhow::Error::msg(e.to_string()))
                .context("generating blob")?;
            write_file(&output, &blob)?;
            let json = serde_json::to_string_pretty(&ground_truth)?;
            match truth {
                Some(path) => {
                    std::fs::write(&path, json.as_bytes())
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {} (ground truth)", path.display());
                }
                None => say!("{json}"),
            }
            Ok(0)
        }
        Fixture::Update { seed, app_size, boot_size, app_version, boot_version, output } => {
            let bytes = gen_update_bytes(
                seed,
                app_size.try_into().context("--app-size does not fit in memory")?,
                boot_size.try_into().context("--boot-size does not fit in memory")?,
                app_version,
                boot_version,
            )
            .map_err(|e| anyhow::Error::msg(e.to_string()))
            .context("generating update")?;
            write_file(&output, &bytes)?;
            Ok(0)
        }
    }
}
