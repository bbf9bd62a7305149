"""Точка входа: предобучение и диагностика модели ccc.

Примеры:
  python main.py make-synthetic --out data/synthetic --clips 200
  python main.py pretrain --config configs/toy_ccc.json
  python main.py gradcheck --config configs/gradcheck.json
  python main.py probe --checkpoint runs/toy_ccc/checkpoint_last.npz --corpus data/synthetic
Переменные окружения (файл .env) описаны в config.py.
"""
import argparse
import sys
from typing import List, Optional

from backend.ccc import setup_logging
from backend.ccc.errors import CCCError
from backend.ccc.trainer import gradcheck_cmd, load_config, make_synthetic, pretrain, probe_cmd
from config import Config


def cmd_pretrain(args) -> int:
    config = load_config(args.config)
    if args.out:
        config.paths.out_dir = args.out
    if args.corpus:
        config.paths.corpus_dir = args.corpus
    if args.steps is not None:
        config.lr_schedule.total_updates = args.steps
        config.lr_schedule.warmup_updates = min(config.lr_schedule.warmup_updates, args.steps)
    result = pretrain(config.validate(), strict=Config.CCC_STRICT or args.strict, workers=Config.CCC_WORKERS)
    if result.last:
        first, last = result.first, result.last
        print(f"[OK] {result.steps} шагов: l_total {first['l_total']:.4f} -> {last['l_total']:.4f}, "
              f"точность {last['contrastive_accuracy']:.3f}")
    else:
        print("[OK] 0 шагов: сохранена начальная контрольная точка")
    print(f"[OK] Контрольная точка: {result.checkpoint_path}")
    print(f"[OK] Метрики: {result.metrics_path}")
    return 0


def cmd_gradcheck(args) -> int:
    report = gradcheck_cmd(load_config(args.config), epsilon=args.epsilon)
    print(report.format())
    if not report.passed:
        print("[!] Относительная ошибка градиента превышает допуск")
        return 1
    print("[OK] Все градиенты совпадают с конечными разностями")
    return 0


def cmd_probe(args) -> int:
    result = probe_cmd(args.checkpoint, args.corpus, seed=args.seed, workers=Config.CCC_WORKERS)
    print(f"[OK] Точность зонда: {result.accuracy:.3f} (случайный уровень {result.chance:.3f}, "
          f"{result.test_clips} клипов, {result.test_frames} кадров)")
    return 0


def cmd_make_synthetic(args) -> int:
    corpus = make_synthetic(args.out, clips=args.clips, seed=args.seed)
    print(f"[OK] {corpus.clips} клипов, шумы в {corpus.noise_dir}, RIR в {corpus.rir_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Кросс-контрастное предобучение wav2vec 2.0 (игрушечный масштаб)")
    p.add_argument("--log-level", default=None, help="уровень логирования (по умолчанию CCC_LOG_LEVEL)")
    sub = p.add_subparsers(dest="cmd", required=True)

    p_train = sub.add_parser("pretrain", help="запустить предобучение")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", help="каталог результатов (перекрывает paths.out_dir)")
    p_train.add_argument("--corpus", help="каталог WAV (перекрывает paths.corpus_dir)")
    p_train.add_argument("--steps", type=int, help="число шагов (перекрывает total_updates)")
    p_train.add_argument("--strict", action="store_true", help="проверять NaN/Inf на каждой операции")
    p_train.set_defaults(func=cmd_pretrain)

    p_grad = sub.add_parser("gradcheck", help="проверить градиенты четырёх вариантов цели")
    p_grad.add_argument("--config", required=True)
    p_grad.add_argument("--epsilon", type=float, default=1e-4)
    p_grad.set_defaults(func=cmd_gradcheck)

    p_probe = sub.add_parser("probe", help="линейный зонд по замороженным кадрам")
    p_probe.add_argument("--checkpoint", required=True)
    p_probe.add_argument("--corpus", required=True)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.set_defaults(func=cmd_probe)

    p_syn = sub.add_parser("make-synthetic", help="создать синтетический корпус")
    p_syn.add_argument("--out", required=True)
    p_syn.add_argument("--clips", type=int, default=200)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.set_defaults(func=cmd_make_synthetic)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(level=args.log_level)
    try:
        return args.func(args)
    except CCCError as exc:
        print(f"[!] {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
