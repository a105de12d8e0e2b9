from django.core.management import BaseCommand, CommandError

from layer.config import load_config
from layer.exceptions import ConfigError
from layer.runner import EXIT_CONFIG, EXIT_OK, run


class Command(BaseCommand):
    """Django command to run the layer solver: eigenvalues, pole, sweep or validate"""
    help = 'Embedded eigenvalues and resonance poles of a layer with a wire and a surface impurity.'

    def add_arguments(self, parser):
        parser.add_argument('mode', choices=['eigenvalues', 'pole', 'sweep', 'validate'])
        parser.add_argument('--config', required=True, help='run configuration file')
        parser.add_argument('--output', help='output path, overriding [output] path')
        parser.add_argument('--threads', type=int, help='worker threads for sweeps')
        parser.add_argument('--seed-re', type=float, help='real part of the pole-mode root seed')
        parser.add_argument('--seed-im', type=float, default=0.0, help='imaginary part of the root seed')
        parser.add_argument('--quad-order', type=int, help='quadrature order per parameter direction')

    def handle(self, *args, **options):
        try:
            config = load_config(options['config'])
        except ConfigError as exc:
            raise CommandError(f'Invalid configuration: {exc}', returncode=EXIT_CONFIG)

        if config.mode != options['mode']:
            raise CommandError(
                f"Config {options['config']} is for mode {config.mode}, not {options['mode']}",
                returncode=EXIT_CONFIG,
            )
        if options['threads'] is not None and options['threads'] < 1:
            raise CommandError('--threads must be at least 1', returncode=EXIT_CONFIG)
        if options['quad_order'] is not None and options['quad_order'] < 2:
            raise CommandError('--quad-order must be at least 2', returncode=EXIT_CONFIG)

        seed = None
        if options['seed_re'] is not None:
            seed = complex(options['seed_re'], options['seed_im'])
        config = config.with_overrides(threads=options['threads'], quad_order=options['quad_order'], seed=seed,
                                       output=options['output'])

        code = run(config, stdout=self.stdout)
        if code != EXIT_OK:
            raise CommandError(f'{config.mode} run failed', returncode=code)
        self.stdout.write(self.style.SUCCESS(f'Wrote {config.output.path}'))
