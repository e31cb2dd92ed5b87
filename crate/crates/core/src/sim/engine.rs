//! Single-replication event loop for preemptive-resume static buffer
//! priority.
//!
//! A job draws its full service requirement when it first enters service;
//! on preemption the unfinished part is kept on the job and resumed later
//! without a new draw. All statistics are time integrals of the
//! piecewise-constant queue-length process over the observation window.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use super::calendar::{Calendar, EventKind};
use super::rng::{stream, StreamKind};
use super::{ReplicationStats, SimConfig, DEFAULT_HIST_CAP};
use crate::distribution::UnitSampler;
use crate::error::{Error, Result};
use crate::network::{canonicalize, validate_spec, NetworkSpec, PriorityPolicy};

#[derive(Debug, Clone, Copy)]
struct Job {
    id: u64,
    entry: f64,
    /// Drawn requirement; NaN until the job first enters service.
    drawn: f64,
    remaining: f64,
    served: f64,
}

impl Job {
    fn new(id: u64, entry: f64) -> Self {
        Self {
            id,
            entry,
            drawn: f64::NAN,
            remaining: f64::NAN,
            served: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Station {
    /// Class order, highest priority first.
    order: Vec<usize>,
    serving: Option<usize>,
    segment_start: f64,
    version: u64,
}

/// Where a completion goes: cumulative probabilities over next classes.
#[derive(Debug, Clone)]
enum Route {
    Exit,
    To(usize),
    Random(Vec<(usize, f64)>),
}

struct Recorder {
    recording: bool,
    window_start: f64,
    caps: Vec<usize>,
    last_change: Vec<f64>,
    area: Vec<f64>,
    hist: Vec<Vec<f64>>,
    /// `Σ_{l∈H(k)} Z_l` per class k.
    high_count: Vec<u64>,
    idle_since: Vec<f64>,
    idle_time: Vec<f64>,
    /// For class l, the classes k with l ∈ H(k).
    affects: Vec<Vec<usize>>,
    pairs: Vec<(usize, usize)>,
    pairs_of: Vec<Vec<usize>>,
    pair_last: Vec<f64>,
    /// Per pair, `joint[p][x][y]` is time spent in cell (x, y); rows grow
    /// on demand.
    joint: Vec<Vec<Vec<f64>>>,
    departures: Vec<u64>,
    sojourn_sum: f64,
    sojourn_count: u64,
}

impl Recorder {
    fn bin(&self, class: usize, z: u64) -> usize {
        (z as usize).min(self.caps[class] + 1)
    }

    fn open(&mut self, now: f64) {
        self.recording = true;
        self.window_start = now;
        self.last_change.iter_mut().for_each(|t| *t = now);
        self.pair_last.iter_mut().for_each(|t| *t = now);
        for (k, since) in self.idle_since.iter_mut().enumerate() {
            if self.high_count[k] == 0 {
                *since = now;
            }
        }
    }

    fn change(&mut self, z: &mut [u64], class: usize, new: u64, now: f64) {
        let old = z[class];
        if self.recording {
            let dt = now - self.last_change[class];
            self.area[class] += old as f64 * dt;
            let b = self.bin(class, old);
            self.hist[class][b] += dt;
            for &p in &self.pairs_of[class] {
                let (i, j) = self.pairs[p];
                let (x, y) = (self.bin(i, z[i]), self.bin(j, z[j]));
                let grid = &mut self.joint[p];
                if grid.len() <= x {
                    grid.resize_with(x + 1, Vec::new);
                }
                if grid[x].len() <= y {
                    grid[x].resize(y + 1, 0.0);
                }
                grid[x][y] += now - self.pair_last[p];
                self.pair_last[p] = now;
            }
        }
        self.last_change[class] = now;
        for &k in &self.affects[class] {
            let before = self.high_count[k];
            let after = before + new - old;
            if before == 0 && after > 0 && self.recording {
                self.idle_time[k] += now - self.idle_since[k];
            } else if before > 0 && after == 0 {
                self.idle_since[k] = now;
            }
            self.high_count[k] = after;
        }
        z[class] = new;
    }

    fn close(&mut self, z: &mut [u64], now: f64) {
        for class in 0..z.len() {
            let cur = z[class];
            self.change(z, class, cur, now);
        }
        for k in 0..self.idle_time.len() {
            if self.high_count[k] == 0 {
                self.idle_time[k] += now - self.idle_since[k];
            }
        }
        self.recording = false;
    }
}

struct Engine {
    now: f64,
    calendar: Calendar,
    queues: Vec<VecDeque<Job>>,
    z: Vec<u64>,
    stations: Vec<Station>,
    station_of: Vec<usize>,
    means: Vec<f64>,
    rates: Vec<f64>,
    arrival_samplers: Vec<Option<UnitSampler>>,
    service_samplers: Vec<UnitSampler>,
    arrival_rng: Vec<ChaCha8Rng>,
    service_rng: Vec<ChaCha8Rng>,
    routing_rng: Vec<ChaCha8Rng>,
    routes: Vec<Route>,
    next_job: u64,
    rec: Recorder,
    max_service_residual: f64,
    events: u64,
}

impl Engine {
    fn draw_route(&mut self, class: usize) -> Option<usize> {
        match &self.routes[class] {
            Route::Exit => None,
            Route::To(next) => Some(*next),
            Route::Random(cum) => {
                let u: f64 = rand::Rng::random(&mut self.routing_rng[class]);
                cum.iter().find(|(_, c)| u < *c).map(|(next, _)| *next)
            }
        }
    }

    fn schedule_arrival(&mut self, class: usize) {
        let sampler = self.arrival_samplers[class].as_ref().expect("external class");
        let gap = sampler.sample(&mut self.arrival_rng[class]) / self.rates[class];
        self.calendar
            .schedule(self.now + gap, EventKind::Arrival { class });
    }

    fn top_class(&self, station: usize) -> Option<usize> {
        self.stations[station]
            .order
            .iter()
            .copied()
            .find(|&c| !self.queues[c].is_empty())
    }

    /// Re-evaluates which class a station serves; on a change the running
    /// job is settled and a fresh completion event is issued.
    fn reschedule(&mut self, station: usize) {
        let top = self.top_class(station);
        let now = self.now;
        let st = &mut self.stations[station];
        if top == st.serving {
            return;
        }
        if let Some(c) = st.serving {
            let job = self.queues[c].front_mut().expect("serving class is nonempty");
            let elapsed = now - st.segment_start;
            job.remaining -= elapsed;
            job.served += elapsed;
        }
        st.version += 1;
        st.serving = top;
        if let Some(c) = top {
            let job = self.queues[c].front_mut().expect("top class is nonempty");
            if job.drawn.is_nan() {
                let d = self.means[c] * self.service_samplers[c].sample(&mut self.service_rng[c]);
                job.drawn = d;
                job.remaining = d;
            }
            st.segment_start = now;
            let finish = now + job.remaining.max(0.0);
            let version = st.version;
            self.calendar
                .schedule(finish, EventKind::Completion { station, version });
        }
    }

    fn enqueue(&mut self, class: usize, job: Job) {
        self.queues[class].push_back(job);
        let n = self.z[class] + 1;
        self.rec.change(&mut self.z, class, n, self.now);
    }

    fn complete(&mut self, station: usize) {
        let now = self.now;
        let st = &mut self.stations[station];
        let class = st.serving.take().expect("completion at an idle station");
        let mut job = self.queues[class].pop_front().expect("serving class is nonempty");
        job.served += now - st.segment_start;
        let residual = (job.served - job.drawn).abs() / job.drawn.max(1.0);
        self.max_service_residual = self.max_service_residual.max(residual);
        let n = self.z[class] - 1;
        self.rec.change(&mut self.z, class, n, now);
        if self.rec.recording {
            self.rec.departures[class] += 1;
        }
        match self.draw_route(class) {
            Some(next) => {
                self.enqueue(next, Job::new(job.id, job.entry));
                let s = self.station_of[next];
                if s != station {
                    self.reschedule(s);
                }
            }
            None => {
                if self.rec.recording {
                    self.rec.sojourn_sum += now - job.entry;
                    self.rec.sojourn_count += 1;
                }
            }
        }
        self.reschedule(station);
    }

    #[cfg(debug_assertions)]
    fn check_work_conservation(&self) {
        for (j, st) in self.stations.iter().enumerate() {
            debug_assert_eq!(st.serving, self.top_class(j), "station {j} is not work conserving");
        }
        debug_assert_eq!(
            self.z.iter().sum::<u64>(),
            self.queues.iter().map(|q| q.len() as u64).sum::<u64>()
        );
    }
}

/// Runs one replication with the given replication seed.
pub fn run_replication(
    spec: &NetworkSpec,
    policy: &PriorityPolicy,
    config: &SimConfig,
    seed: u64,
) -> Result<ReplicationStats> {
    let diagnostics = validate_spec(spec);
    if !diagnostics.is_empty() {
        return Err(Error::InvalidSpec(diagnostics));
    }
    let ix = canonicalize(spec, policy)?;
    if config.arrivals == 0 {
        return Err(Error::NonpositiveHorizon("arrival budget is zero".into()));
    }
    if !(0.0..1.0).contains(&config.warmup_frac) {
        return Err(Error::NonpositiveHorizon(format!(
            "warm-up fraction {} is outside [0, 1)",
            config.warmup_frac
        )));
    }
    let warmup_arrivals = (config.warmup_frac * config.arrivals as f64).floor() as u64;
    if warmup_arrivals >= config.arrivals {
        return Err(Error::NonpositiveHorizon(
            "warm-up consumes the whole arrival budget".into(),
        ));
    }

    let k = spec.num_classes();
    let caps: Vec<usize> = (0..k)
        .map(|c| config.hist_caps.get(c).copied().unwrap_or(DEFAULT_HIST_CAP))
        .collect();
    let mut affects = vec![Vec::new(); k];
    for c in 0..k {
        let kc = ix.canonical(c);
        for &h in ix.at_least_as_high(kc) {
            affects[ix.user(h)].push(c);
        }
    }
    let mut pairs_of = vec![Vec::new(); k];
    for (p, &(i, j)) in config.joint_pairs.iter().enumerate() {
        if i >= k || j >= k || i == j {
            return Err(Error::Config(format!(
                "joint pair ({}, {}) must name two distinct classes",
                i + 1,
                j + 1
            )));
        }
        pairs_of[i].push(p);
        pairs_of[j].push(p);
    }

    let routes = spec
        .routing
        .iter()
        .map(|row| {
            let targets: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(l, &p)| (l, p))
                .collect();
            match targets.as_slice() {
                [] => Route::Exit,
                [(l, p)] if *p >= 1.0 => Route::To(*l),
                _ => {
                    let mut acc = 0.0;
                    Route::Random(
                        targets
                            .iter()
                            .map(|&(l, p)| {
                                acc += p;
                                (l, acc)
                            })
                            .collect(),
                    )
                }
            }
        })
        .collect();

    let mut engine = Engine {
        now: 0.0,
        calendar: Calendar::new(),
        queues: vec![VecDeque::new(); k],
        z: vec![0; k],
        stations: policy
            .stations
            .iter()
            .map(|order| Station {
                order: order.clone(),
                serving: None,
                segment_start: 0.0,
                version: 0,
            })
            .collect(),
        station_of: (0..k).map(|c| spec.station_of(c)).collect(),
        means: spec.mean_services(),
        rates: spec.arrival_rates(),
        arrival_samplers: spec
            .classes
            .iter()
            .map(|c| match (c.arrival_rate > 0.0, c.arrival_dist) {
                (true, Some(d)) => d.sampler().map(Some),
                _ => Ok(None),
            })
            .collect::<Result<_>>()?,
        service_samplers: spec
            .classes
            .iter()
            .map(|c| c.service_dist.sampler())
            .collect::<Result<_>>()?,
        arrival_rng: (0..k).map(|c| stream(seed, StreamKind::Arrival, c)).collect(),
        service_rng: (0..k).map(|c| stream(seed, StreamKind::Service, c)).collect(),
        routing_rng: (0..k).map(|c| stream(seed, StreamKind::Routing, c)).collect(),
        routes,
        next_job: 0,
        rec: Recorder {
            recording: false,
            window_start: 0.0,
            hist: caps.iter().map(|&cap| vec![0.0; cap + 2]).collect(),
            caps,
            last_change: vec![0.0; k],
            area: vec![0.0; k],
            high_count: vec![0; k],
            idle_since: vec![0.0; k],
            idle_time: vec![0.0; k],
            affects,
            pairs: config.joint_pairs.clone(),
            pairs_of,
            pair_last: vec![0.0; config.joint_pairs.len()],
            joint: vec![Vec::new(); config.joint_pairs.len()],
            departures: vec![0; k],
            sojourn_sum: 0.0,
            sojourn_count: 0,
        },
        max_service_residual: 0.0,
        events: 0,
    };

    if warmup_arrivals == 0 {
        engine.rec.open(0.0);
    }
    for c in 0..k {
        if engine.arrival_samplers[c].is_some() {
            engine.schedule_arrival(c);
        }
    }

    let mut arrivals = 0u64;
    while let Some((time, event)) = engine.calendar.pop() {
        match event {
            EventKind::Completion { station, version } => {
                if engine.stations[station].version != version {
                    continue;
                }
                engine.now = time;
                engine.events += 1;
                engine.complete(station);
            }
            EventKind::Arrival { class } => {
                engine.now = time;
                engine.events += 1;
                arrivals += 1;
                if arrivals == warmup_arrivals {
                    engine.rec.open(time);
                }
                if arrivals == config.arrivals {
                    break;
                }
                let id = engine.next_job;
                engine.next_job += 1;
                engine.enqueue(class, Job::new(id, time));
                engine.schedule_arrival(class);
                engine.reschedule(engine.station_of[class]);
            }
        }
        #[cfg(debug_assertions)]
        engine.check_work_conservation();
    }

    let end = engine.now;
    let mut z = engine.z.clone();
    engine.rec.close(&mut z, end);
    let rec = engine.rec;
    let window = end - rec.window_start;
    if !(window > 0.0) {
        return Err(Error::NonpositiveHorizon(
            "observation window has zero length".into(),
        ));
    }
    let joint = rec
        .joint
        .into_iter()
        .map(|grid| {
            grid.into_iter()
                .enumerate()
                .flat_map(|(x, row)| {
                    row.into_iter()
                        .enumerate()
                        .filter(|&(_, w)| w > 0.0)
                        .map(move |(y, w)| ((x, y), w / window))
                })
                .collect()
        })
        .collect();
    Ok(ReplicationStats {
        seed,
        window_start: rec.window_start,
        window_end: end,
        time_avg: rec.area.iter().map(|a| a / window).collect(),
        idle_frac: rec.idle_time.iter().map(|t| t / window).collect(),
        hist: rec
            .hist
            .into_iter()
            .map(|h| h.into_iter().map(|t| t / window).collect())
            .collect(),
        joint,
        departure_rate: rec.departures.iter().map(|&d| d as f64 / window).collect(),
        mean_sojourn: if rec.sojourn_count > 0 {
            rec.sojourn_sum / rec.sojourn_count as f64
        } else {
            f64::NAN
        },
        sojourn_count: rec.sojourn_count,
        max_service_residual: engine.max_service_residual,
        events: engine.events,
    })
}
