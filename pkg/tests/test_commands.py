"""Tests for CamoFlow CLI commands"""

import json

import pytest

from camoflow.commands import CamoFlowCommands, config_from_args, create_parser, main
from camoflow.data.pnm import read_pnm
from camoflow.exceptions import NumericError


@pytest.fixture
def tiny_config_file(tiny_cfg, temp_dir):
    path = temp_dir / 'tiny.json'
    tiny_cfg.save(path)
    return path


class TestParser:
    """Tests for argument parsing"""

    def test_train_flags(self):
        args = create_parser().parse_args([
            'train', 'data/train.tsv', '--out', 'runs/a', '--no-sbd', '--lr', '0.01',
            '--input-size', '64', '--max-steps', '10', '--resume',
        ])
        assert args.command == 'train'
        assert str(args.train_manifest) == 'data/train.tsv'
        assert args.resume and args.no_sbd and not args.no_mskm
        cfg = config_from_args(args)
        assert (cfg.lr, cfg.input_size, cfg.max_steps) == (0.01, 64, 10)
        assert cfg.ablation.label() == 'no-sbd'

    def test_flags_override_file(self, tiny_config_file):
        args = create_parser().parse_args(['gradcheck', '--config', str(tiny_config_file), '--seed', '4'])
        cfg = config_from_args(args)
        assert cfg.seed == 4
        assert cfg.widths == (8, 16, 16, 32)

    def test_checkpoint_config_used(self, tiny_cfg, temp_dir):
        (temp_dir / 'run').mkdir()
        tiny_cfg.save(temp_dir / 'run' / 'config.json')
        args = create_parser().parse_args(['eval', str(temp_dir / 'run' / 'best.cofi'), 'val.tsv', '--out', 'e'])
        assert config_from_args(args, args.checkpoint) == tiny_cfg

    def test_gen_data_defaults(self):
        args = create_parser().parse_args(['gen-data', '--out', 'data'])
        assert (args.n, args.val, args.test, args.size) == (8, 0, 0, 64)

    def test_infer_flags(self):
        args = create_parser().parse_args(['infer', 'best.cofi', 'frog.ppm', '--out', 'frog.pgm', '--emit-intermediate'])
        assert args.emit_intermediate

    def test_out_required(self):
        with pytest.raises(SystemExit):
            create_parser().parse_args(['train', 'data/train.tsv'])


class TestMain:
    """End-to-end runs through main()"""

    def test_no_command(self):
        assert main([]) == 0

    def test_gen_data(self, temp_dir):
        out = temp_dir / 'data'
        assert main(['gen-data', '--out', str(out), '--seed', '7', '--n', '2', '--val', '1', '--size', '32']) == 0
        assert (out / 'train.tsv').read_text().count('\n') == 2
        assert (out / 'val.tsv').read_text().count('\n') == 1
        assert not (out / 'test.tsv').exists()

    def test_train_eval_infer(self, corpus, tiny_config_file, temp_dir):
        run = temp_dir / 'run'
        assert main([
            'train', str(corpus['root'] / 'train.tsv'), '--val', str(corpus['root'] / 'val.tsv'),
            '--out', str(run), '--config', str(tiny_config_file), '--epochs', '1',
        ]) == 0
        assert (run / 'best.cofi').is_file()
        assert json.loads((run / 'config.json').read_text())['epochs'] == 1

        assert main(['eval', str(run / 'best.cofi'), str(corpus['root'] / 'val.tsv'), '--out', str(temp_dir / 'eval')]) == 0
        report = json.loads((temp_dir / 'eval' / 'report.json').read_text())
        assert [image['id'] for image in report['per_image']] == ['val_0000', 'val_0001']

        image = corpus['val'].entries[0].image
        assert main(['infer', str(run / 'best.cofi'), str(image), '--out', str(temp_dir / 'p.pgm'), '--emit-intermediate']) == 0
        for name in ('p.pgm', 'p.coarse.pgm', 'p.fine.pgm'):
            assert read_pnm(temp_dir / name).magic == 'P5'
        assert (temp_dir / 'p.pgm').read_bytes() == (temp_dir / 'eval' / 'masks' / 'val_0000.pgm').read_bytes()


class TestExitCodes:
    """Error classes map to documented exit codes"""

    def test_configuration_error(self, temp_dir):
        assert main(['gen-data', '--out', str(temp_dir), '--size', '48']) == 2

    def test_io_error(self, temp_dir):
        assert main(['train', str(temp_dir / 'missing.tsv'), '--out', str(temp_dir / 'run')]) == 3

    def test_manifest_naming_missing_image(self, temp_dir):
        (temp_dir / 'train.tsv').write_text('a\tgone.ppm\tgone.pgm\n')
        assert main(['train', str(temp_dir / 'train.tsv'), '--out', str(temp_dir / 'run')]) == 3
        assert not (temp_dir / 'run' / 'best.cofi').exists()

    def test_format_error(self, temp_dir):
        (temp_dir / 'bad.tsv').write_text('only-one-field\n')
        assert main(['train', str(temp_dir / 'bad.tsv'), '--out', str(temp_dir / 'run')]) == 3

    def test_numeric_error(self, temp_dir, mocker):
        mocker.patch.object(CamoFlowCommands, 'cmd_train', side_effect=NumericError("loss is nan"))
        assert main(['train', 'x.tsv', '--out', str(temp_dir)]) == 4

    def test_interrupt(self, temp_dir, mocker):
        mocker.patch.object(CamoFlowCommands, 'cmd_gen_data', side_effect=KeyboardInterrupt)
        assert main(['gen-data', '--out', str(temp_dir)]) == 130

    def test_unexpected_error(self, temp_dir, mocker):
        mocker.patch.object(CamoFlowCommands, 'cmd_gen_data', side_effect=RuntimeError("boom"))
        assert main(['gen-data', '--out', str(temp_dir)]) == 1

    def test_error_reported_on_stderr(self, temp_dir, capsys):
        main(['gen-data', '--out', str(temp_dir), '--size', '48'])
        assert 'ConfigurationError' in capsys.readouterr().err
