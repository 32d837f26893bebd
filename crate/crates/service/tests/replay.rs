mod common;

use std::fs;
use std::io::Write;

use onlc_service::store::{read_log, StoreError, LOG_FILE, SNAPSHOT_FILE};
use onlc_service::{replay, sim, ScoringMode, Service, ServiceConfig, ServiceError};

fn disk_config(dir: &std::path::Path, mode: ScoringMode, snapshot_every: u64) -> ServiceConfig {
    ServiceConfig {
        data_dir: Some(dir.to_path_buf()),
        snapshot_every,
        ..common::light_config(mode)
    }
}

#[test]
fn log_replay_rebuilds_live_state() {
    let dir = tempfile::tempdir().unwrap();
    let config = disk_config(dir.path(), ScoringMode::Manual, 0);
    let live = {
        let svc = Service::open(config.clone()).unwrap();
        let report = sim::run(&svc, &common::cohort(8, 5), &common::short_sim(5)).unwrap();
        assert!(report.nurse_scores > 0 && report.messages > 0 && report.retrains > 0);
        svc.state()
    };
    assert!(!dir.path().join(SNAPSHOT_FILE).exists());

    let events = read_log(&dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(events.len() as u64, live.seq);
    let rebuilt = replay(&events).unwrap();
    assert_eq!(rebuilt.to_json(), live.to_json());

    let reopened = Service::open(config).unwrap();
    assert_eq!(reopened.state().to_json(), live.to_json());
}

#[test]
fn snapshot_plus_tail_matches_full_replay() {
    let dir = tempfile::tempdir().unwrap();
    let config = disk_config(dir.path(), ScoringMode::Auto, 97);
    let live = {
        let svc = Service::open(config.clone()).unwrap();
        sim::run(&svc, &common::cohort(8, 6), &common::short_sim(6)).unwrap();
        svc.state()
    };
    assert!(dir.path().join(SNAPSHOT_FILE).exists());
    assert_ne!(live.seq % 97, 0, "tail after the snapshot should be non-empty");

    let reopened = Service::open(config.clone()).unwrap();
    assert_eq!(reopened.state().to_json(), live.to_json());
    let full = replay(&read_log(&dir.path().join(LOG_FILE)).unwrap()).unwrap();
    assert_eq!(full.to_json(), live.to_json());

    // commands keep working after a restart and land after the old tail
    let before = reopened.state().seq;
    reopened.update_lookup(Default::default()).unwrap();
    drop(reopened);
    let again = Service::open(config).unwrap();
    assert_eq!(again.state().seq, before + 1);
}

#[test]
fn corrupted_log_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = disk_config(dir.path(), ScoringMode::Manual, 0);
    {
        let svc = Service::open(config.clone()).unwrap();
        for p in common::cohort(4, 7) {
            svc.register_patient(p.profile).unwrap();
        }
    }
    let path = dir.path().join(LOG_FILE);
    let mut f = fs::OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(b"{\"seq\": 5, \"type\": \"nonsense\"}\n").unwrap();
    drop(f);
    match read_log(&path) {
        Err(StoreError::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(Service::open(config), Err(ServiceError::Store(_))));
}

#[test]
fn replay_rejects_reordered_events() {
    let svc = Service::in_memory(common::light_config(ScoringMode::Manual));
    for p in common::cohort(4, 8) {
        svc.register_patient(p.profile).unwrap();
    }
    let mut events = svc.memory_log();
    events.swap(1, 2);
    assert!(replay(&events).is_err());
}
