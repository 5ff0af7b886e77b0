"""Operator surface: ``spectral-captcha <command> --config run.yml [--section.key value ...]``.

Exit codes: 0 success, 2 partial failure, 64 usage error.
"""
import concurrent.futures
import functools
import os
import sys
import time

import click

from configs import load_run_config
from spectral_captcha.asr import load_oracle, transcribe
from spectral_captcha.asr.mock import fit_mock
from spectral_captcha.audio import load_wav
from spectral_captcha.breaker import StatMap, run_breaker
from spectral_captcha.corpus import json_files, load_corpus, load_manifest, wav_files
from spectral_captcha.craft import (
    assemble_captcha, challenge_labels, craft_kenansville, craft_yeehaw, decimation_for,
    load_challenge, load_result, save_challenge, save_result, verify_answer
)
from spectral_captcha.detect import (
    SpectralStatsProvider, Verdict, cdf_rows, classify_input, evasion_probability, fit_profile
)
from spectral_captcha.exceptions import (
    CaptchaError, DegenerateClasses, MissingCraftedLabel, UsageError
)
from spectral_captcha.phonetics import load_dictionary
from spectral_captcha.report import (
    MATRIX_HEADER, PHONETIC_HEADER, PROBABILITY_HEADER, breaker_success_rate, evasion_matrix,
    phonetic_summary, probability_rows, transfer_rows
)
from spectral_captcha.utils import read_json, setup_logger, write_csv, write_json

logger = setup_logger('cli_logger')

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_USAGE = 64

CRAFT_HEADER = ["file", "label", "algorithm", "t_d_frac", "alpha", "rmse", "queries", "success",
                "seed", "error"]
VARIANT_HEADER = ["file", "segment", "noise_fraction", "realization", "rmse", "transcript", "correct"]
CLASSIFY_HEADER = ["file", "class", "transcript", "verdict"]

EXTRA_ARGS = dict(ignore_unknown_options=True, allow_extra_args=True)


def parse_overrides(args):
    """``['--search.tolerance', '0.01', '--workers=4']`` -> dotted-key overrides."""
    overrides, args = {}, list(args)
    while args:
        flag = args.pop(0)
        if not flag.startswith('--') or len(flag) == 2:
            raise UsageError(f"unexpected argument {flag!r}; overrides look like --section.key value")
        key, sep, value = flag[2:].partition('=')
        if not sep:
            if not args:
                raise UsageError(f"override {flag} needs a value")
            value = args.pop(0)
        overrides[key] = value
    return overrides


def command(func):
    """Loads the run config for a command and maps errors onto exit codes."""
    @click.pass_context
    @functools.wraps(func)
    def wrapper(ctx, config, **kwargs):
        try:
            cfg = load_run_config(config, parse_overrides(ctx.args))
            code = func(cfg, **kwargs)
        except UsageError as e:
            click.echo(f"usage error: {e.message}", err=True)
            code = EXIT_USAGE
        except CaptchaError as e:
            logger.error(f"{e.code}: {e.message}")
            code = EXIT_PARTIAL
        ctx.exit(code or EXIT_OK)
    return click.option('--config', 'config', type=click.Path(), default=None,
                        help='YAML run configuration')(wrapper)


@click.group()
def cli():
    """Craft, assemble, attack and detect spectral audio CAPTCHAs."""


def _corpus(cfg):
    entries = load_manifest(cfg.manifest)
    return entries, load_corpus(cfg.corpus_dir, entries)


def _oracle(cfg, oracle_config=None, corpus=None):
    oracle_config = oracle_config or cfg.oracle
    if oracle_config.kind == "mock" and not oracle_config.mock.model_path and corpus is None:
        if not cfg.manifest:
            raise UsageError("a mock oracle needs oracle.mock.model_path or a manifest to fit on")
        _, corpus = _corpus(cfg)
    return load_oracle(oracle_config, corpus)


def _pool_size(cfg):
    # remote endpoints are rate limited; one request in flight at a time
    if cfg.oracle.kind == "remote":
        return 1
    return cfg.workers


def run_batch(job, items, workers):
    """Runs ``job`` on every item with a bounded pool; results keep item order."""
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, items))


def cmd_fit(cfg):
    _, corpus = _corpus(cfg)
    model = fit_mock(corpus, cfg.oracle.mock)
    path = os.path.join(cfg.output_dir, "mock_oracle.json")
    model.save(path)
    click.echo(f"wrote {path}")
    return EXIT_OK


def cmd_craft(cfg, algorithm):
    entries, corpus = _corpus(cfg)
    oracle = _oracle(cfg, corpus=corpus)
    craft_dir = os.path.join(cfg.output_dir, "craft")

    def record_failure(entry, label, error):
        logger.exception(f"crafting {entry.path} failed")
        write_json(os.path.join(craft_dir, f"{entry.stem}.json"),
                   dict(error.serialize, file=entry.path, label=label, algorithm=algorithm,
                        seed=cfg.seed))
        return False

    def job(item):
        index, (entry, (buffer, label)) = item
        try:
            if algorithm == "kenansville":
                result = craft_kenansville(buffer, label, oracle, cfg.search)
            else:
                t_d = decimation_for(cfg.perturbation, cfg.seed, index)
                result = craft_yeehaw(buffer, oracle, t_d, cfg.sweep, cfg.search, original_label=label)
        except CaptchaError as e:
            return record_failure(entry, label, e)
        except Exception as e:
            # any other failure still gets a per-file record
            return record_failure(entry, label, CaptchaError(f"{type(e).__name__}: {e}"))
        result.seed, result.file = cfg.seed, entry.path
        save_result(result, craft_dir, entry.stem)
        return True

    outcomes = run_batch(job, list(enumerate(zip(entries, corpus))), _pool_size(cfg))
    rows = craft_summary_rows([os.path.join(craft_dir, f"{e.stem}.json") for e in entries])
    write_csv(os.path.join(cfg.output_dir, "summary.csv"), CRAFT_HEADER, rows)

    failed = outcomes.count(False)
    click.echo(f"crafted {len(outcomes) - failed} of {len(outcomes)} files ({algorithm})")
    return EXIT_PARTIAL if failed else EXIT_OK


def craft_summary_rows(json_paths):
    """Summary rows derived from per-file JSON records, so the CSV can be rebuilt exactly."""
    rows = []
    for path in json_paths:
        data = read_json(path)
        error = ",".join(sorted(data.get('errors', {}))) or None
        rows.append([data.get('file'), data.get('label'), data.get('algorithm'),
                     data.get('t_d_frac'), data.get('alpha'), data.get('distortion_rmse'),
                     data.get('oracle_queries'), bool(data.get('success', False)),
                     data.get('seed'), error])
    return rows


def _crafted_by_label(cfg, algorithm):
    craft_dir = os.path.join(cfg.output_dir, "craft")
    by_label = {}
    for path in json_files(craft_dir):
        data = read_json(path)
        if data.get('success') and data.get('algorithm') == algorithm:
            by_label.setdefault(data['label'], path)
    return by_label


def cmd_assemble(cfg, labels, length, count, algorithm):
    by_label = _crafted_by_label(cfg, algorithm)
    challenge_dir = os.path.join(cfg.output_dir, "challenges")

    for i in range(count):
        seed = cfg.seed + i
        wanted = labels or challenge_labels(cfg.vocabulary, length or cfg.captcha_length, seed)
        missing = sorted({label for label in wanted if label not in by_label})
        if missing:
            raise MissingCraftedLabel(f"no successful {algorithm} result for {', '.join(missing)}")

        results = [(load_result(by_label[label]), label) for label in wanted]
        challenge = assemble_captcha(results, cfg.gap_ms, seed)
        challenge.sources = [result.file for result, _ in results]
        path = save_challenge(challenge, challenge_dir, f"challenge-{i:03d}")
        click.echo(f"wrote {path}")
    return EXIT_OK


def cmd_verify(cfg, challenge_path, answer):
    challenge = load_challenge(challenge_path)
    if verify_answer(challenge, answer):
        click.echo("correct")
        return EXIT_OK
    click.echo("incorrect")
    return EXIT_PARTIAL


def _challenge_paths(cfg, challenge_path):
    if challenge_path:
        return [challenge_path]
    directory = os.path.join(cfg.output_dir, "challenges")
    paths = json_files(directory)
    if not paths:
        raise UsageError(f"no challenge manifests under {directory}")
    return paths


def cmd_attack(cfg, challenge_path, feedback):
    challenges = [(path, load_challenge(path)) for path in _challenge_paths(cfg, challenge_path)]
    oracle = _oracle(cfg)
    dictionary = load_dictionary(cfg.dictionary)
    attack_dir = os.path.join(cfg.output_dir, "attacks")
    map_path = os.path.join(attack_dir, "stat_map.json")
    stat_map = StatMap.from_dict(read_json(map_path)) if os.path.exists(map_path) \
        else StatMap(min_support=cfg.min_support)

    variant_rows, partial = [], False
    for path, challenge in challenges:
        name = os.path.splitext(os.path.basename(path))[0]
        rows = []
        report = run_breaker(challenge, oracle, dictionary, cfg.vocabulary, stat_map, cfg.sweep,
                             cfg.segmentation, feedback=feedback, rows=rows)
        write_json(os.path.join(attack_dir, f"{name}.json"),
                   dict(report.serialize, challenge=os.path.basename(path), seed=cfg.seed))
        partial = partial or bool(report.errors)

        for row in rows:
            expected = challenge.answer[row['segment']] if row['segment'] < len(challenge.answer) else None
            correct = expected is not None and row['transcript'].casefold() == expected.casefold()
            variant_rows.append([name, row['segment'], row['noise_fraction'], row['realization'],
                                 row['rmse'], row['transcript'], correct])
        click.echo(f"{name}: {'solved' if report.success else 'failed'} ({report.answer!r})")

    write_csv(os.path.join(attack_dir, "variants.csv"), VARIANT_HEADER, variant_rows)
    if feedback:
        write_json(map_path, stat_map.serialize)
    return EXIT_PARTIAL if partial else EXIT_OK


def _labelled_buffers(directory):
    return [(path, load_wav(path)) for path in wav_files(directory)]


def cmd_detect(cfg, noise_dir, captcha_dir, eval_dir):
    noise_dir = noise_dir or cfg.detect.noise_dir
    captcha_dir = captcha_dir or cfg.detect.captcha_dir
    eval_dir = eval_dir or cfg.detect.eval_dir
    noise, captcha = _labelled_buffers(noise_dir), _labelled_buffers(captcha_dir)
    if not noise or not captcha:
        raise DegenerateClasses(f"need WAV files in both {noise_dir} and {captcha_dir}")

    provider = SpectralStatsProvider(cfg.detect.frame_sizes, cfg.detect.bands)
    profile = fit_profile(provider, [b for _, b in noise], [b for _, b in captcha],
                          cfg.detect.center_rule)
    detect_dir = os.path.join(cfg.output_dir, "detect")
    write_json(os.path.join(detect_dir, "profile.json"), profile.serialize)
    write_csv(os.path.join(detect_dir, "cdf.csv"), ["layer", "distance", "class"],
              cdf_rows(profile, provider, [b for _, b in noise], [b for _, b in captcha]))

    if eval_dir:
        evaluation = [(p, b, "noise") for p, b in _labelled_buffers(os.path.join(eval_dir, "noise"))]
        evaluation += [(p, b, "captcha") for p, b in _labelled_buffers(os.path.join(eval_dir, "captcha"))]
        evaluation += [(p, b, None) for p, b in _labelled_buffers(eval_dir)]
    else:
        evaluation = [(p, b, "noise") for p, b in noise] + [(p, b, "captcha") for p, b in captcha]

    oracle = _oracle(cfg)
    rows, labels, predictions = [], [], []
    for path, buffer, kind in evaluation:
        transcript = transcribe(oracle, buffer)
        verdict = classify_input(buffer, transcript, profile, provider)
        rows.append([os.path.basename(path), kind, transcript.text, verdict.value])
        if kind is not None:
            labels.append(kind == "captcha")
            predictions.append(verdict is Verdict.SUSPECTED_CAPTCHA)
    write_csv(os.path.join(detect_dir, "classification.csv"), CLASSIFY_HEADER, rows)

    metrics = {'calibration': {'precision': profile.precision, 'recall': profile.recall,
                               'taus': list(profile.taus)}}
    if labels:
        flagged = [want for want, got in zip(labels, predictions) if got]
        positives = sum(labels)
        metrics['evaluation'] = {
            'precision': sum(flagged) / len(flagged) if flagged else 0.0,
            'recall': sum(1 for want, got in zip(labels, predictions) if want and got) / positives
            if positives else 0.0,
            'samples': len(labels),
        }
    write_json(os.path.join(detect_dir, "metrics.json"), metrics)

    write_csv(os.path.join(detect_dir, "evasion.csv"), ["captcha_length", "probability", "percent"],
              [(n, evasion_probability(profile.recall, n), 100 * evasion_probability(profile.recall, n))
               for n in range(1, 11)])
    click.echo(f"calibrated: precision={profile.precision:.3f} recall={profile.recall:.3f}")
    return EXIT_OK


def cmd_report(cfg, results_dir):
    results_dir = results_dir or cfg.output_dir
    craft_dir = os.path.join(results_dir, "craft")
    report_dir = os.path.join(results_dir, "report")
    notices = []

    samples = []
    for path in json_files(craft_dir):
        data = read_json(path)
        if data.get('success'):
            result = load_result(path)
            samples.append({'file': data['file'], 'label': data['label'],
                            'algorithm': data['algorithm'], 'surrogate': data['oracle'],
                            'audio': result.perturbed})

    oracle_configs = [cfg.oracle, *cfg.oracles]
    oracles = [_oracle(cfg, oracle_config) for oracle_config in oracle_configs]
    rows = transfer_rows(samples, oracles)
    write_csv(os.path.join(report_dir, "transfer.csv"),
              ["file", "label", "algorithm", "surrogate", "target", "transcript", "evaded", "error"],
              [[r['file'], r['label'], r['algorithm'], r['surrogate'], r['target'], r['transcript'],
                r['evaded'], r['error']] for r in rows])

    if len(oracles) >= 2:
        write_csv(os.path.join(report_dir, "evasion_matrix.csv"), MATRIX_HEADER, evasion_matrix(rows))
    else:
        notices.append("evasion matrix omitted: configure at least two oracles under 'oracles'")
        logger.info(notices[-1])

    write_csv(os.path.join(report_dir, "phonetic_distance.csv"), PHONETIC_HEADER,
              phonetic_summary(rows, load_dictionary(cfg.dictionary)))

    rates = {}
    own = [r['evaded'] for r in rows if r['target'] == cfg.oracle.name and r['evaded'] is not None]
    if own:
        rates['transfer_failure'] = sum(own) / len(own)
    attack_dir = os.path.join(results_dir, "attacks")
    reports = [read_json(path) for path in json_files(attack_dir)
               if os.path.basename(path) != "stat_map.json"]
    rates['break'] = breaker_success_rate(reports)
    profile_path = os.path.join(results_dir, "detect", "profile.json")
    if os.path.exists(profile_path):
        rates['evasion'] = read_json(profile_path)['recall']

    write_csv(os.path.join(report_dir, "probabilities.csv"), PROBABILITY_HEADER,
              probability_rows(rates, range(1, cfg.captcha_length + 1)))
    write_json(os.path.join(report_dir, "summary.json"),
               {'samples': len(samples), 'oracles': [o.name for o in oracles],
                'rates': rates, 'notices': notices, 'seed': cfg.seed})
    for notice in notices:
        click.echo(notice)
    return EXIT_OK


def cmd_serve(cfg, host, port):
    from spectral_captcha.asr.mock import MockOracleModel
    from spectral_captcha.server import create_app

    model_path = cfg.server.model_path or cfg.oracle.mock.model_path
    if model_path:
        model = MockOracleModel.load(model_path)
    else:
        _, corpus = _corpus(cfg)
        model = fit_mock(corpus, cfg.oracle.mock)
    create_app(model, cfg.server).run(host=host, port=port)
    return EXIT_OK


@cli.command(context_settings=EXTRA_ARGS)
@command
def fit(cfg):
    """Fit the mock oracle on the configured corpus."""
    return cmd_fit(cfg)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--algorithm', type=click.Choice(['kenansville', 'yeehaw']), default='yeehaw')
@command
def craft(cfg, algorithm):
    """Craft one perturbed sample per corpus file."""
    start = time.perf_counter()
    code = cmd_craft(cfg, algorithm)
    logger.info(f"Elapsed time: {(time.perf_counter() - start) / 60:.2f} [min]")
    return code


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--labels', default=None, help='comma separated labels, in answer order')
@click.option('--length', type=int, default=None)
@click.option('--count', type=int, default=1)
@click.option('--algorithm', type=click.Choice(['kenansville', 'yeehaw']), default='yeehaw')
@command
def assemble(cfg, labels, length, count, algorithm):
    """Assemble crafted utterances into challenges."""
    labels = [label.strip() for label in labels.split(',')] if labels else None
    return cmd_assemble(cfg, labels, length, count, algorithm)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--challenge', 'challenge_path', required=True)
@click.option('--answer', required=True)
@command
def verify(cfg, challenge_path, answer):
    """Check an answer against a challenge manifest."""
    return cmd_verify(cfg, challenge_path, answer)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--challenge', 'challenge_path', default=None)
@click.option('--feedback/--no-feedback', default=False)
@command
def attack(cfg, challenge_path, feedback):
    """Run the adaptive breaker on assembled challenges."""
    return cmd_attack(cfg, challenge_path, feedback)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--noise-dir', default=None)
@click.option('--captcha-dir', default=None)
@click.option('--eval-dir', default=None)
@command
def detect(cfg, noise_dir, captcha_dir, eval_dir):
    """Calibrate the detector and classify evaluation audio."""
    return cmd_detect(cfg, noise_dir, captcha_dir, eval_dir)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--results', 'results_dir', default=None)
@command
def report(cfg, results_dir):
    """Build evasion, phonetic distance and probability tables."""
    return cmd_report(cfg, results_dir)


@cli.command(context_settings=EXTRA_ARGS)
@click.option('--host', default='127.0.0.1')
@click.option('--port', type=int, default=5000)
@command
def serve(cfg, host, port):
    """Serve the mock oracle over HTTP (development server)."""
    return cmd_serve(cfg, host, port)


def main(argv=None):
    try:
        return cli.main(args=argv, prog_name='spectral-captcha', standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1


if __name__ == '__main__':
    sys.exit(main())
